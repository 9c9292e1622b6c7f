#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rwre/errors.hpp"
#include "rwre/walker.hpp"
#include "support.hpp"

using namespace rwre;

namespace {

void check_consistent(const Trajectory& t) {
  std::int32_t max_level = 0;
  for (std::size_t k = 1; k < t.level_profile.size(); ++k) {
    CHECK(std::abs(t.level_profile[k] - t.level_profile[k - 1]) == 1);
    CHECK(t.level_profile[k] >= -1);
    if (t.level_profile[k] > max_level) {
      max_level = t.level_profile[k];
      CHECK(t.tau[static_cast<std::size_t>(max_level)] == k);
    }
  }
  CHECK(t.max_level() == max_level);
  CHECK(t.fresh_nu.size() == t.tau.size());
}

}  // namespace

TEST_CASE("trajectories are nearest-neighbour paths with consistent hitting times") {
  const auto m = testing::random_model(3);
  for (std::uint64_t s = 0; s < 20; ++s) {
    LazyTree tree(m, s);
    const auto t = run(tree, 100 + s, {std::nullopt, 5000, false});
    CHECK(t.steps() == 5000);
    CHECK(t.status == WalkStatus::budget_exhausted);
    check_consistent(t);
    if (!t.at_parent_of_root) CHECK(static_cast<std::int32_t>(t.current.generation()) == t.level());
  }
}

TEST_CASE("the root's parent sends the walk back to the root") {
  LazyTree tree(constant_model(2, 0.2), 1);  // recurrent: many root exits
  const auto t = run(tree, 5, {std::nullopt, 20000, false});
  CHECK(t.exited_root.has_value());
  std::uint64_t exits = 0;
  for (std::size_t k = 1; k < t.level_profile.size(); ++k) {
    if (t.level_profile[k - 1] == -1) CHECK(t.level_profile[k] == 0);
    exits += t.level_profile[k] == -1;
  }
  CHECK(exits > 100);
  CHECK(t.level_profile[*t.exited_root] == -1);
  for (std::uint64_t k = 0; k < *t.exited_root; ++k) CHECK(t.level_profile[k] >= 0);
}

TEST_CASE("stop rules") {
  LazyTree tree(constant_model(2, 2.0), 4);
  const auto t = run(tree, 9, {10, 100000, false});
  CHECK(t.status == WalkStatus::reached_level);
  CHECK(t.level() == 10);
  CHECK(t.tau[10] == t.steps());

  LazyTree rec(constant_model(2, 0.2), 1);
  const auto e = run(rec, 5, {std::nullopt, 100000, true});
  CHECK(e.status == WalkStatus::exited_root);
  CHECK(*e.exited_root == e.steps());
}

TEST_CASE("first step frequencies match the transition probabilities") {
  // constant A = lambda on the binary tree: P(step to the parent) = 1 / (1 + 2 lambda)
  const double lambda = 0.8;
  const auto m = constant_model(2, lambda);
  const std::uint64_t n = 40000;
  std::uint64_t up = 0;
  LazyTree tree(m, 1);
  for (std::uint64_t s = 0; s < n; ++s) up += run(tree, s, {std::nullopt, 1, false}).level() == -1;
  const double p = 1 / (1 + 2 * lambda);
  CHECK(std::abs(static_cast<double>(up) / n - p) < 4 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("walks are reproducible and unaffected by cache trimming") {
  const auto m = testing::random_model(4);
  LazyTree a(m, 21);
  LazyTree b(m, 21, TreeOptions{64});
  const auto ta = run(a, 77, {std::nullopt, 20000, false}, {true});
  const auto tb = run(b, 77, {std::nullopt, 20000, false}, {true});
  CHECK(ta.level_profile == tb.level_profile);
  CHECK(ta.fresh_nu == tb.fresh_nu);
  CHECK(ta.current == tb.current);
  CHECK(ta.local_time == tb.local_time);
  // the cap holds up to the retained root-to-current path
  CHECK(b.cached() < a.cached());
  CHECK(b.cached() <= static_cast<std::size_t>(ta.max_level()) + 1 + 64);

  std::uint64_t visits = ta.parent_of_root_visits;
  for (const auto& [x, n] : ta.local_time) visits += n;
  CHECK(visits == ta.steps() + 1);

  LazyTree c(m, 21);
  const auto tc = run(c, 78, {std::nullopt, 20000, false});
  CHECK(tc.level_profile != ta.level_profile);
}

TEST_CASE("advance resumes a walk") {
  const auto m = testing::random_model(5);
  LazyTree a(m, 2), b(m, 2);
  Walker w(a, 3);
  w.advance({std::nullopt, 1000, false});
  w.advance({std::nullopt, 3000, false});
  const auto whole = run(b, 3, {std::nullopt, 3000, false});
  CHECK(w.take().level_profile == whole.level_profile);
}

TEST_CASE("conditioned sampler") {
  CHECK_THROWS_AS(ConditionedSampler(constant_model(2, 0.2), {}), PreconditionViolation);
  SamplerConfig bad;
  bad.level_cut = 0;
  CHECK_THROWS_AS(ConditionedSampler(constant_model(2, 2.0), bad), PreconditionViolation);

  const auto m = constant_model(2, 2.0);
  SamplerConfig cfg;
  cfg.level_cut = 20;
  ConditionedSampler s1(m, cfg, 5), s2(m, cfg, 5);
  const auto d1 = s1.next();
  const auto d2 = s2.next();
  CHECK(d1.trajectory.level_profile == d2.trajectory.level_profile);
  CHECK(d1.attempt == d2.attempt);
  CHECK_FALSE(d1.trajectory.exited_root.has_value());
  CHECK(d1.trajectory.level() == 20);

  // draw k does not depend on which draws came before it
  ConditionedSampler seq(m, cfg, 0);
  Trajectory third;
  for (std::uint64_t k = 0; k < 3; ++k) {
    seq.set_stream(k);
    third = seq.next().trajectory;
  }
  ConditionedSampler direct(m, cfg, 2);
  CHECK(direct.next().trajectory.level_profile == third.level_profile);

  // acceptance rate converges to beta = 1 - 1/(b lambda) = 3/4
  ConditionedSampler many(m, cfg, 0);
  for (std::uint64_t k = 0; k < 5000; ++k) {
    many.set_stream(k);
    many.next();
  }
  const auto& tel = many.telemetry();
  CHECK(tel.accepted == 5000);
  CHECK(tel.attempts == tel.accepted + tel.exited_before_cut + tel.horizon_before_cut + tel.exited_after_cut);
  const double rate = tel.acceptance_rate();
  CHECK(std::abs(rate - 0.75) < 4 * std::sqrt(0.75 * 0.25 / tel.attempts));

  // quenched policy reuses one tree
  SamplerConfig q = cfg;
  q.policy = EnvPolicy::quenched;
  ConditionedSampler qs(m, q, 0);
  const auto qa = qs.next();
  qs.set_stream(1);
  const auto qb = qs.next();
  CHECK(qa.tree_seed == qb.tree_seed);
}

TEST_CASE("acceptance starvation is reported") {
  // transient but escaping is rare within a tiny horizon
  SamplerConfig cfg;
  cfg.level_cut = 50;
  cfg.horizon = 60;
  cfg.starvation_attempts = 200;
  cfg.starvation_rate = 0.5;
  ConditionedSampler s(parse_model("offspring = 2:1\nenv = 0.4:0.5 1:0.5\n"), cfg);
  CHECK_THROWS_AS(s.next(), AcceptanceStarved);
}

TEST_CASE("coupling with the biased walk dominates level increments") {
  const auto m = parse_model("offspring = 2:0.5 3:0.5\nenv = 0.6:0.5 1.5:0.5\n");
  CHECK_THROWS_AS(
      [] {
        LazyTree t(constant_model(2, 0.4), 1);
        coupled_run_with_biased_walk(t, 1, 10);
      }(),
      PreconditionViolation);
  for (std::uint64_t s = 0; s < 20; ++s) {
    LazyTree tree(m, s);
    const auto c = coupled_run_with_biased_walk(tree, s, 3000);
    CHECK(c.p_up == doctest::Approx(1.2 / 2.2));
    const auto& lv = c.walk.level_profile;
    const std::uint64_t stop = c.walk.exited_root ? *c.walk.exited_root : c.walk.steps();
    for (std::uint64_t k = 0; k < stop; ++k) CHECK(lv[k + 1] - lv[k] >= c.biased[k + 1] - c.biased[k]);
    LazyTree again(m, s);
    CHECK(run(again, s, {std::nullopt, 3000, false}).level_profile == lv);
  }
}
