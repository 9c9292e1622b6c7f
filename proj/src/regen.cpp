#include "rwre/regen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rwre/errors.hpp"

namespace rwre {

namespace {

struct WeightedLine {
  double intercept = 0.0;
  double slope = 0.0;
  double slope_se = 0.0;
  double r_squared = 0.0;
};

// Weighted least squares y = a + b x.
WeightedLine fit_line(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w) {
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double mx = sx / sw;
  const double my = sy / sw;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
    syy += w[i] * (y[i] - my) * (y[i] - my);
  }
  WeightedLine out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - out.intercept - out.slope * x[i];
    rss += w[i] * r * r;
  }
  const double dof = static_cast<double>(x.size()) - 2.0;
  out.slope_se = dof > 0 ? std::sqrt(rss / dof / sxx) : 0.0;
  out.r_squared = syy > 0 ? 1.0 - rss / syy : 1.0;
  return out;
}

// Inverse variance of ln P; uniform weights when any point is exact.
std::vector<double> log_weights(const std::vector<SurvivalPoint>& pts) {
  std::vector<double> w(pts.size(), 1.0);
  bool exact = false;
  for (const auto& p : pts) exact = exact || p.std_error <= 0.0;
  if (exact) return w;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double rel = pts[i].std_error / pts[i].p_hat;
    w[i] = 1.0 / (rel * rel);
  }
  return w;
}

}  // namespace

std::vector<RegenRecord> find_regenerations(const Trajectory& traj, std::int32_t margin) {
  if (traj.exited_root) {
    throw PreconditionViolation("regenerations need a trajectory without root exit");
  }
  const auto& prof = traj.level_profile;
  const std::uint64_t last = traj.steps();
  const std::int32_t cutoff = traj.max_level() - margin;

  std::vector<std::uint64_t> times;
  std::int32_t suffix_min = std::numeric_limits<std::int32_t>::max();
  for (std::uint64_t k = last; k >= 1; --k) {
    const std::int32_t lvl = prof[k];
    if (lvl >= 1 && traj.tau[static_cast<std::size_t>(lvl)] == k &&
        traj.fresh_nu[static_cast<std::size_t>(lvl)] >= 2 && suffix_min >= lvl) {
      times.push_back(k);
    }
    suffix_min = std::min(suffix_min, lvl);
  }
  std::reverse(times.begin(), times.end());

  std::vector<RegenRecord> out;
  out.reserve(times.size());
  std::uint64_t prev_t = 0;
  std::int32_t prev_l = 0;
  for (std::size_t j = 0; j < times.size(); ++j) {
    RegenRecord r;
    r.time = times[j];
    r.level = prof[times[j]];
    r.time_increment = r.time - prev_t;
    r.level_increment = r.level - prev_l;
    r.initial = j == 0;
    r.censored = r.level > cutoff;
    out.push_back(r);
    prev_t = r.time;
    prev_l = r.level;
  }
  return out;
}

SpeedEstimate speed_estimate(std::span<const RegenRecord> records, const SpeedOptions& options) {
  double sl = 0.0, st = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (r.censored || (r.initial && !options.include_initial)) continue;
    sl += r.level_increment;
    st += static_cast<double>(r.time_increment);
    ++n;
  }
  if (n < options.min_records || n < 2) {
    throw InsufficientData("speed estimate needs at least " + std::to_string(options.min_records) +
                           " uncensored records, got " + std::to_string(n));
  }
  const double nd = static_cast<double>(n);
  const double ml = sl / nd;
  const double mt = st / nd;
  const double v = ml / mt;
  double vl = 0.0, vt = 0.0, cov = 0.0;
  for (const auto& r : records) {
    if (r.censored || (r.initial && !options.include_initial)) continue;
    const double dl = r.level_increment - ml;
    const double dt = static_cast<double>(r.time_increment) - mt;
    vl += dl * dl;
    vt += dt * dt;
    cov += dl * dt;
  }
  vl /= nd - 1.0;
  vt /= nd - 1.0;
  cov /= nd - 1.0;
  const double var = std::max(0.0, (vl - 2.0 * v * cov + v * v * vt) / (mt * mt * nd));
  SpeedEstimate out;
  out.v_hat = v;
  out.std_error = std::sqrt(var);
  out.ci_low = v - 1.96 * out.std_error;
  out.ci_high = v + 1.96 * out.std_error;
  out.records = n;
  return out;
}

RegenBatch collect_regenerations(const ModelSpec& model, const RegenRunConfig& config, std::uint64_t first_draw,
                                 std::uint64_t count) {
  RegenBatch batch;
  ConditionedSampler sampler(model, config.sampler, first_draw);
  const auto horizon = config.sampler.horizon;
  const auto target = config.target_level;
  for (std::uint64_t d = 0; d < count; ++d) {
    sampler.set_stream(first_draw + d);
    auto draw = sampler.next([&](Walker& w) { w.advance({target, horizon, true}); });
    for (const auto& r : find_regenerations(draw.trajectory, config.margin)) {
      if (!r.censored) batch.records.push_back(r);
    }
    ++batch.draws;
  }
  batch.telemetry = sampler.telemetry();
  return batch;
}

Gamma1Sample first_regeneration(const Trajectory& traj, std::int32_t margin) {
  const auto regs = find_regenerations(traj, margin);
  if (regs.empty()) return {traj.steps(), true};
  const auto& first = regs.front();
  if (!first.censored) return {first.time, false};
  return {first.time - 1, true};
}

Gamma1Batch sample_gamma1(const ModelSpec& model, const Gamma1Config& config, std::uint64_t first_draw,
                          std::uint64_t count) {
  Gamma1Batch batch;
  batch.samples.reserve(count);
  ConditionedSampler sampler(model, config.sampler, first_draw);
  const auto horizon = config.sampler.horizon;
  const auto margin = config.margin;
  // Extend the walk by `margin` generations at a time until its first
  // regeneration is confirmed or the horizon is spent.
  const Continuation confirm = [&](Walker& w) {
    for (;;) {
      const auto& t = w.trajectory();
      if (!first_regeneration(t, margin).censored || t.steps() >= horizon) return;
      if (w.advance({t.max_level() + margin, horizon, true}) == WalkStatus::exited_root) return;
    }
  };
  for (std::uint64_t d = 0; d < count; ++d) {
    sampler.set_stream(first_draw + d);
    const auto draw = sampler.next(confirm);
    batch.samples.push_back(first_regeneration(draw.trajectory, margin));
  }
  batch.telemetry = sampler.telemetry();
  return batch;
}

SurvivalCurve survival_curve(std::span<const Gamma1Sample> samples, int points_per_decade) {
  SurvivalCurve curve;
  curve.draws = samples.size();
  std::uint64_t top = 1;
  for (const auto& s : samples) {
    top = std::max(top, s.value);
    if (s.censored) ++curve.censored;
  }
  std::vector<std::uint64_t> grid;
  for (int j = 0;; ++j) {
    const auto n = static_cast<std::uint64_t>(std::llround(std::pow(10.0, static_cast<double>(j) / points_per_decade)));
    if (n > top) break;
    if (grid.empty() || grid.back() != n) grid.push_back(n);
  }
  for (auto n : grid) {
    SurvivalPoint p;
    p.n = n;
    for (const auto& s : samples) {
      if (s.censored) {
        if (s.value >= n) {
          ++p.total;
          ++p.survivors;
        }
      } else {
        ++p.total;
        if (s.value > n) ++p.survivors;
      }
    }
    if (p.total == 0) continue;
    p.p_hat = static_cast<double>(p.survivors) / static_cast<double>(p.total);
    p.std_error = std::sqrt(p.p_hat * (1.0 - p.p_hat) / static_cast<double>(p.total));
    curve.points.push_back(p);
  }
  return curve;
}

SurvivalCurve gamma1_tail(const ModelSpec& model, const Gamma1Config& config, std::uint64_t draws,
                          SamplerTelemetry* telemetry) {
  const auto batch = sample_gamma1(model, config, 0, draws);
  if (telemetry) *telemetry = batch.telemetry;
  return survival_curve(batch.samples);
}

std::string_view to_string(TailRegime regime) noexcept {
  return regime == TailRegime::polynomial ? "polynomial" : "stretched";
}

std::vector<SurvivalPoint> tail_window(const SurvivalCurve& curve, const FitWindow& window) {
  std::vector<SurvivalPoint> ok;
  for (const auto& p : curve.points) {
    if (p.survivors < window.min_survivors || p.p_hat <= 0.0 || p.p_hat >= 1.0) continue;
    if (p.std_error / p.p_hat >= window.max_relative_error) continue;
    ok.push_back(p);
  }
  if (ok.empty()) throw InsufficientData("no survival point qualifies for the tail window");
  const double n_top = static_cast<double>(ok.back().n);
  const double n_floor = n_top / std::pow(10.0, window.decades);
  std::vector<SurvivalPoint> out;
  for (const auto& p : ok) {
    if (static_cast<double>(p.n) >= n_floor) out.push_back(p);
  }
  if (out.size() < window.min_points) {
    throw InsufficientData("tail window has " + std::to_string(out.size()) + " points, need " +
                           std::to_string(window.min_points));
  }
  return out;
}

TailFit fit_tail(const SurvivalCurve& curve, TailRegime regime, const FitWindow& window) {
  const auto pts = tail_window(curve, window);
  const auto w = log_weights(pts);
  std::vector<double> x, y, wy;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double ln_n = std::log(static_cast<double>(pts[i].n));
    const double ln_p = std::log(pts[i].p_hat);
    x.push_back(ln_n);
    if (regime == TailRegime::polynomial) {
      y.push_back(ln_p);
      wy.push_back(w[i]);
    } else {
      // var ln(-ln P) = var(ln P) / (ln P)^2
      y.push_back(std::log(-ln_p));
      wy.push_back(w[i] * ln_p * ln_p);
    }
  }
  const auto line = fit_line(x, y, wy);
  TailFit fit;
  fit.regime = regime;
  fit.exponent = line.slope;
  fit.intercept = line.intercept;
  fit.std_error = line.slope_se;
  fit.n_min = pts.front().n;
  fit.n_max = pts.back().n;
  fit.points = pts.size();
  fit.valid = regime == TailRegime::polynomial || (line.slope > 0.0 && line.slope < 1.0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double ln_p = std::log(pts[i].p_hat);
    const double pred = regime == TailRegime::polynomial ? line.intercept + line.slope * x[i]
                                                         : -std::exp(line.intercept + line.slope * x[i]);
    fit.residual += w[i] * (ln_p - pred) * (ln_p - pred);
  }
  return fit;
}

TailFitReport fit_tail(const SurvivalCurve& curve, const FitWindow& window) {
  TailFitReport rep;
  rep.polynomial = fit_tail(curve, TailRegime::polynomial, window);
  rep.stretched = fit_tail(curve, TailRegime::stretched, window);
  const bool stretched_better = rep.stretched.valid && rep.stretched.residual < rep.polynomial.residual;
  rep.preferred = stretched_better ? TailRegime::stretched : TailRegime::polynomial;
  return rep;
}

LinearTailFit fit_exponential_tail(const SurvivalCurve& curve, const FitWindow& window) {
  const auto pts = tail_window(curve, window);
  const auto w = log_weights(pts);
  std::vector<double> x, y;
  for (const auto& p : pts) {
    x.push_back(static_cast<double>(p.n));
    y.push_back(std::log(p.p_hat));
  }
  const auto line = fit_line(x, y, w);
  return {line.slope, line.intercept, line.r_squared, pts.front().n, pts.back().n, pts.size()};
}

}  // namespace rwre
