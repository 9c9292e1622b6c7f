#pragma once

// Regeneration structure of trajectories: detection with margin-based
// censoring, the ratio-of-means speed estimator, the survival curve of the
// first regeneration time and its tail fits.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rwre/model.hpp"
#include "rwre/walker.hpp"

namespace rwre {

// Increment between consecutive regeneration times. The `initial` record
// spans [0, Gamma_1]; every other record spans [Gamma_k, Gamma_{k+1}].
struct RegenRecord {
  std::uint64_t time_increment = 0;
  std::int32_t level_increment = 0;
  bool censored = false;
  bool initial = false;
  std::uint64_t time = 0;   // absolute time of the closing regeneration
  std::int32_t level = 0;   // its generation
};

/// Index k > 0 is a regeneration iff k = tau_{|X_k|}, nu(X_k) >= 2 and the
/// level never drops below |X_k| afterwards (within the horizon). Records
/// closing above max level - margin are censored.
/// Requires a trajectory without root exit.
std::vector<RegenRecord> find_regenerations(const Trajectory& traj, std::int32_t margin);

struct SpeedEstimate {
  double v_hat = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t records = 0;
};

struct SpeedOptions {
  std::size_t min_records = 100;
  bool include_initial = false;
};

/// Ratio of mean level increment to mean time increment over uncensored
/// records, with a delta-method 95% interval.
SpeedEstimate speed_estimate(std::span<const RegenRecord> records, const SpeedOptions& options = {});

struct RegenRunConfig {
  SamplerConfig sampler{};
  std::int32_t margin = 25;
  std::int32_t target_level = 1000;  // each accepted walk continues to this generation
};

struct RegenBatch {
  std::vector<RegenRecord> records;  // uncensored, initial records included
  SamplerTelemetry telemetry;
  std::uint64_t draws = 0;
};

/// Runs draws [first_draw, first_draw + count) of the conditioned sampler
/// and collects their regeneration records in draw order.
RegenBatch collect_regenerations(const ModelSpec& model, const RegenRunConfig& config,
                                 std::uint64_t first_draw, std::uint64_t count);

// First regeneration time of one conditioned draw; when censored, the draw
// only tells that Gamma_1 > value.
struct Gamma1Sample {
  std::uint64_t value = 0;
  bool censored = false;
};

struct Gamma1Config {
  SamplerConfig sampler{};
  std::int32_t margin = 25;
};

struct Gamma1Batch {
  std::vector<Gamma1Sample> samples;
  SamplerTelemetry telemetry;
};

/// First uncensored regeneration of a finite trajectory, or the censoring bound.
Gamma1Sample first_regeneration(const Trajectory& traj, std::int32_t margin);

Gamma1Batch sample_gamma1(const ModelSpec& model, const Gamma1Config& config, std::uint64_t first_draw,
                          std::uint64_t count);

struct SurvivalPoint {
  std::uint64_t n = 0;
  std::uint64_t survivors = 0;
  std::uint64_t total = 0;
  double p_hat = 0.0;
  double std_error = 0.0;
};

struct SurvivalCurve {
  std::vector<SurvivalPoint> points;
  std::uint64_t draws = 0;
  std::uint64_t censored = 0;
};

/// Survival estimates P(Gamma_1 > n) at logarithmically spaced integers n,
/// with binomial standard errors. A censored sample is at risk only for
/// n <= value.
SurvivalCurve survival_curve(std::span<const Gamma1Sample> samples, int points_per_decade = 10);

/// Draws `draws` conditioned walks; requires a transient model.
SurvivalCurve gamma1_tail(const ModelSpec& model, const Gamma1Config& config, std::uint64_t draws,
                          SamplerTelemetry* telemetry = nullptr);

enum class TailRegime { polynomial, stretched };

std::string_view to_string(TailRegime regime) noexcept;

struct FitWindow {
  std::uint64_t min_survivors = 30;
  double decades = 1.0;
  std::size_t min_points = 8;
  double max_relative_error = 0.5;
};

struct TailFit {
  TailRegime regime = TailRegime::polynomial;
  double exponent = 0.0;   // slope of ln P on ln n, or d in P = exp(-c n^d)
  double intercept = 0.0;
  double std_error = 0.0;
  double residual = 0.0;   // weighted squared residual in ln P
  bool valid = true;       // stretched: d in (0,1)
  std::uint64_t n_min = 0;
  std::uint64_t n_max = 0;
  std::size_t points = 0;
};

struct TailFitReport {
  TailFit polynomial;
  TailFit stretched;
  TailRegime preferred = TailRegime::polynomial;

  const TailFit& best() const noexcept { return preferred == TailRegime::polynomial ? polynomial : stretched; }
};

/// Window = points with enough survivors and relative error, restricted to
/// the upper `decades` of n. Throws InsufficientData below `min_points`.
std::vector<SurvivalPoint> tail_window(const SurvivalCurve& curve, const FitWindow& window = {});

TailFit fit_tail(const SurvivalCurve& curve, TailRegime regime, const FitWindow& window = {});
TailFitReport fit_tail(const SurvivalCurve& curve, const FitWindow& window = {});

struct LinearTailFit {
  double slope = 0.0;  // of ln P against n
  double intercept = 0.0;
  double r_squared = 0.0;
  std::uint64_t n_min = 0;
  std::uint64_t n_max = 0;
  std::size_t points = 0;
};

/// Weighted fit of ln P(Gamma_1 > n) against n (exponential tails).
LinearTailFit fit_exponential_tail(const SurvivalCurve& curve, const FitWindow& window = {});

}  // namespace rwre
