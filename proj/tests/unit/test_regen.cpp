#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "rwre/errors.hpp"
#include "rwre/regen.hpp"
#include "support.hpp"

using namespace rwre;

namespace {

Trajectory handmade(std::vector<std::int32_t> profile, std::uint32_t nu) {
  Trajectory t;
  t.level_profile = std::move(profile);
  t.fresh_nu = {nu};
  for (std::size_t k = 1; k < t.level_profile.size(); ++k) {
    if (t.level_profile[k] > t.max_level()) {
      t.tau.push_back(k);
      t.fresh_nu.push_back(nu);
    }
  }
  return t;
}

// Definition applied literally, O(T^2).
std::vector<std::uint64_t> regeneration_times_bruteforce(const Trajectory& t) {
  std::vector<std::uint64_t> out;
  const auto& p = t.level_profile;
  for (std::size_t k = 1; k < p.size(); ++k) {
    const auto lvl = p[k];
    if (lvl < 1) continue;
    bool fresh = true;
    for (std::size_t j = 0; j < k; ++j) fresh = fresh && p[j] < lvl;
    if (!fresh || t.fresh_nu[static_cast<std::size_t>(lvl)] < 2) continue;
    bool stays = true;
    for (std::size_t j = k + 1; j < p.size(); ++j) stays = stays && p[j] >= lvl;
    if (stays) out.push_back(k);
  }
  return out;
}

SurvivalCurve exact_curve(const std::function<double(double)>& p, std::uint64_t n_max) {
  SurvivalCurve c;
  for (std::uint64_t n = 1; n <= n_max; n = static_cast<std::uint64_t>(std::ceil(n * 1.26))) {
    c.points.push_back({n, 1000000, 1000000000, p(static_cast<double>(n)), 0.0});
  }
  return c;
}

}  // namespace

TEST_CASE("regenerations on a handmade profile") {
  const auto t = handmade({0, 1, 2, 1, 2, 3, 4}, 2);
  const auto r = find_regenerations(t, 1);
  REQUIRE(r.size() == 3);
  CHECK(r[0].time == 1);
  CHECK(r[0].initial);
  CHECK_FALSE(r[0].censored);
  CHECK(r[1].time == 5);
  CHECK(r[1].time_increment == 4);
  CHECK(r[1].level_increment == 2);
  CHECK_FALSE(r[1].censored);
  CHECK(r[2].time == 6);
  CHECK(r[2].censored);

  // one-child vertices never regenerate
  CHECK(find_regenerations(handmade({0, 1, 2, 3}, 1), 0).empty());

  auto exited = t;
  exited.exited_root = 3;
  CHECK_THROWS_AS(find_regenerations(exited, 1), PreconditionViolation);
}

TEST_CASE("regeneration detection matches the definition on simulated walks") {
  const auto m = testing::random_model(7);
  SamplerConfig cfg;
  cfg.level_cut = 10;
  ConditionedSampler sampler(m, cfg);
  for (std::uint64_t d = 0; d < 30; ++d) {
    sampler.set_stream(d);
    const auto draw = sampler.next([](Walker& w) { w.advance({120, 100000, true}); });
    const auto expected = regeneration_times_bruteforce(draw.trajectory);
    const auto found = find_regenerations(draw.trajectory, 10);
    REQUIRE(found.size() == expected.size());
    for (std::size_t i = 0; i < found.size(); ++i) {
      CHECK(found[i].time == expected[i]);
      CHECK(found[i].censored == (found[i].level > draw.trajectory.max_level() - 10));
    }
  }
}

TEST_CASE("first_regeneration") {
  CHECK(first_regeneration(handmade({0, 1, 2, 1, 2, 3, 4}, 2), 1).value == 1);
  const auto censored = first_regeneration(handmade({0, 1, 0, 1, 2}, 2), 5);
  CHECK(censored.censored);
  CHECK(censored.value == 3);  // first candidate, at time 4, is unconfirmed
  const auto none = first_regeneration(handmade({0, 1, 0, 1}, 1), 1);
  CHECK(none.censored);
  CHECK(none.value == 3);
}

TEST_CASE("speed estimate") {
  std::vector<RegenRecord> recs;
  std::mt19937_64 gen(1);
  double sl = 0, st = 0;
  for (int i = 0; i < 500; ++i) {
    RegenRecord r;
    r.level_increment = 1 + static_cast<int>(gen() % 4);
    r.time_increment = r.level_increment + 2 * (gen() % 5);
    sl += r.level_increment;
    st += static_cast<double>(r.time_increment);
    recs.push_back(r);
  }
  RegenRecord skipped;
  skipped.initial = true;
  skipped.level_increment = 1000;
  skipped.time_increment = 1;
  recs.push_back(skipped);
  RegenRecord cens;
  cens.censored = true;
  cens.level_increment = 1000;
  cens.time_increment = 1;
  recs.push_back(cens);
  const auto est = speed_estimate(recs);
  CHECK(est.v_hat == doctest::Approx(sl / st));
  CHECK(est.records == 500);
  CHECK(est.std_error > 0);
  CHECK(est.ci_low < est.v_hat);
  CHECK(est.ci_high > est.v_hat);
  CHECK_THROWS_AS(speed_estimate(std::span(recs).first(50)), InsufficientData);
}

TEST_CASE("speed on a constant environment") {
  // birth-death oracle for the level process: (b lambda - 1)/(b lambda + 1)
  const double b = 2, lambda = 2;
  RegenRunConfig cfg;
  cfg.target_level = 400;
  const auto batch = collect_regenerations(constant_model(2, lambda), cfg, 0, 20);
  const auto est = speed_estimate(batch.records);
  const double v = (b * lambda - 1) / (b * lambda + 1);
  CHECK(std::abs(est.v_hat - v) < 4 * est.std_error);
  CHECK(batch.draws == 20);
  CHECK(batch.telemetry.accepted == 20);
}

TEST_CASE("collect_regenerations is split-invariant") {
  const auto m = testing::random_model(8, false);
  RegenRunConfig cfg;
  cfg.target_level = 100;
  const auto whole = collect_regenerations(m, cfg, 0, 10);
  auto left = collect_regenerations(m, cfg, 0, 4);
  const auto right = collect_regenerations(m, cfg, 4, 6);
  left.records.insert(left.records.end(), right.records.begin(), right.records.end());
  REQUIRE(left.records.size() == whole.records.size());
  for (std::size_t i = 0; i < whole.records.size(); ++i) CHECK(left.records[i].time == whole.records[i].time);
  CHECK(left.telemetry.attempts + right.telemetry.attempts == whole.telemetry.attempts);
}

TEST_CASE("gamma1 sampling confirms the first regeneration") {
  const auto m = testing::random_model(9);
  Gamma1Config cfg;
  cfg.sampler.level_cut = 5;
  const auto batch = sample_gamma1(m, cfg, 0, 200);
  CHECK(batch.samples.size() == 200);
  std::size_t censored = 0;
  for (const auto& s : batch.samples) {
    CHECK(s.value >= 1);
    censored += s.censored;
  }
  CHECK(censored == 0);
  const auto again = sample_gamma1(m, cfg, 0, 200);
  for (std::size_t i = 0; i < 200; ++i) CHECK(again.samples[i].value == batch.samples[i].value);
}

TEST_CASE("survival curve") {
  std::vector<Gamma1Sample> samples;
  for (std::uint64_t v = 1; v <= 100; ++v) samples.push_back({v, false});
  samples.push_back({5, true});  // at risk only up to n = 5
  const auto c = survival_curve(samples, 10);
  CHECK(c.draws == 101);
  CHECK(c.censored == 1);
  CHECK(c.points.front().n == 1);
  for (const auto& p : c.points) {
    const std::uint64_t uncensored_survivors = 100 - std::min<std::uint64_t>(p.n, 100);
    if (p.n <= 5) {
      CHECK(p.total == 101);
      CHECK(p.survivors == uncensored_survivors + 1);
    } else {
      CHECK(p.total == 100);
      CHECK(p.survivors == uncensored_survivors);
    }
    CHECK(p.p_hat == doctest::Approx(static_cast<double>(p.survivors) / p.total));
  }
  for (std::size_t i = 1; i < c.points.size(); ++i) CHECK(c.points[i].n > c.points[i - 1].n);
}

TEST_CASE("tail fits recover exact curves") {
  FitWindow w;
  w.min_survivors = 1;
  w.decades = 2;
  const auto power = exact_curve([](double n) { return 0.8 * std::pow(n, -1.7); }, 5000);
  const auto pf = fit_tail(power, w);
  CHECK(pf.polynomial.exponent == doctest::Approx(-1.7).epsilon(1e-9));
  CHECK(pf.preferred == TailRegime::polynomial);

  const auto stretched = exact_curve([](double n) { return std::exp(-0.3 * std::pow(n, 0.5)); }, 5000);
  const auto sf = fit_tail(stretched, w);
  CHECK(sf.stretched.exponent == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(sf.stretched.valid);
  CHECK(sf.preferred == TailRegime::stretched);

  const auto expo = exact_curve([](double n) { return 0.5 * std::exp(-0.02 * n); }, 800);
  const auto ef = fit_exponential_tail(expo, w);
  CHECK(ef.slope == doctest::Approx(-0.02).epsilon(1e-9));
  CHECK(ef.r_squared == doctest::Approx(1.0));

  FitWindow strict;
  strict.min_points = 100;
  CHECK_THROWS_AS(fit_tail(power, strict), InsufficientData);
  CHECK_THROWS_AS(tail_window(SurvivalCurve{}), InsufficientData);
}
