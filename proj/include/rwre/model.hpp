#pragma once

// Model parameters (offspring law and the law of A) and the closed-form /
// numerical criteria derived from them.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rwre {

inline constexpr double kNormalizationTolerance = 1e-12;
inline constexpr double kBoundaryTolerance = 1e-9;

struct OffspringAtom {
  std::uint32_t k;
  double q;
};

// Offspring distribution (q_k). Requires q_0 = 0 and mean > 1.
class OffspringLaw {
 public:
  explicit OffspringLaw(std::vector<OffspringAtom> atoms);

  const std::vector<OffspringAtom>& atoms() const noexcept { return atoms_; }
  double mean() const noexcept { return mean_; }
  double q(std::uint32_t k) const noexcept;
  double q1() const noexcept { return q(1); }
  std::uint32_t nu_min() const noexcept { return atoms_.front().k; }
  std::uint32_t nu_max() const noexcept { return atoms_.back().k; }

  // Inverse-CDF sample from a uniform in [0,1).
  std::uint32_t sample(double u) const noexcept;

 private:
  std::vector<OffspringAtom> atoms_;  // sorted by k, zero-weight atoms dropped
  std::vector<double> cdf_;
  double mean_ = 0.0;
};

struct EnvAtom {
  double a;
  double w;
};

// Finite discrete law of A with 0 < ess inf <= ess sup < infinity.
class EnvLaw {
 public:
  explicit EnvLaw(std::vector<EnvAtom> atoms);

  const std::vector<EnvAtom>& atoms() const noexcept { return atoms_; }
  double ess_inf() const noexcept { return atoms_.front().a; }
  double ess_sup() const noexcept { return atoms_.back().a; }
  double sample(double u) const noexcept;

 private:
  std::vector<EnvAtom> atoms_;  // sorted by a, merged duplicates
  std::vector<double> cdf_;
};

struct ModelSpec {
  OffspringLaw offspring;
  EnvLaw env;
};

/// Parses the flat key-value model format:
///
///     # comment
///     offspring = 1:0.5 2:0.5
///     env = 0.25:0.5 4:0.5
///
/// Throws InvalidConfig on syntax errors and InvalidModel on law violations.
ModelSpec parse_model(std::string_view text);
ModelSpec load_model(const std::filesystem::path& path);
std::string format_model(const ModelSpec& model);

// Constant-environment shortcut: A = lambda a.s. on a b-ary tree.
ModelSpec constant_model(std::uint32_t b, double lambda);

/// E[A^t].
double moment(const ModelSpec& model, double t);

struct MomentMinimum {
  double t;
  double value;
};

/// Minimizer and minimum of t -> E[A^t] over [0,1].
MomentMinimum min_moment_unit_interval(const ModelSpec& model);

/// Lebesgue measure of {t : E[A^t] <= 1/r}; +inf when unbounded, 0 when empty.
double lambda_param(const ModelSpec& model, double r);

/// Lambda with r = q_1 (+inf when q_1 = 0).
double lambda_param(const ModelSpec& model);

enum class PsiMode { exact, mc };

struct PsiOptions {
  PsiMode mode = PsiMode::exact;
  std::uint64_t samples = 100000;
  std::uint64_t seed = 1;
  // Maximum number of distinct (nu, multiset of A) configurations.
  std::uint64_t enumeration_budget = 2'000'000;
};

struct PsiValue {
  double value;
  double std_error;  // zero in exact mode
};

// Holds either the exact configuration list of (nu, A_1..A_nu) or a fixed
// Monte Carlo sample, so psi and its derivative at several theta share one
// set of draws.
class PsiEvaluator {
 public:
  PsiEvaluator(const ModelSpec& model, const PsiOptions& options = {});

  PsiValue psi(double theta) const;
  // Exact weighted sum in exact mode; central difference (step 1e-5) in mc mode.
  double derivative(double theta) const;
  PsiMode mode() const noexcept { return mode_; }
  std::size_t configurations() const noexcept { return weights_.size(); }

 private:
  struct Term {
    double count;
    double omega;
  };
  double sum_powers(std::size_t i, double theta) const;

  PsiMode mode_;
  std::vector<double> weights_;
  std::vector<std::size_t> offsets_;  // into terms_, size weights_.size()+1
  std::vector<Term> terms_;
};

PsiValue psi(const ModelSpec& model, double theta, const PsiOptions& options = {});

struct RateAtOne {
  double ia1;            // -psi(1)
  double iq1;            // -inf_{(0,1]} psi(theta)/theta
  double theta_star;     // minimizer of psi(theta)/theta on (0,1]
  double psi1;
  double dpsi1;
  bool coincide;         // dpsi1 <= psi1
  bool boundary;         // |dpsi1 - psi1| < 1e-9: undecided
};

RateAtOne rate_at_one(const ModelSpec& model, const PsiOptions& options = {});

enum class SlowdownRegime { exponential, stretched_exponential, polynomial, degenerate_zero_rate };

std::string_view to_string(SlowdownRegime regime) noexcept;

struct RegimeReport {
  bool transient = false;
  MomentMinimum min_moment{};
  double transience_threshold = 0.0;  // 1/m
  double lambda = 0.0;                // may be +inf
  bool speed_positive = false;
  SlowdownRegime slowdown_regime = SlowdownRegime::degenerate_zero_rate;
  // Comparisons that landed within 1e-9 of their threshold; the
  // corresponding booleans above are not to be trusted.
  std::vector<std::string> boundary_flags;

  bool on_boundary() const noexcept { return !boundary_flags.empty(); }
};

RegimeReport classify(const ModelSpec& model);

}  // namespace rwre
