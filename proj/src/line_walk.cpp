#include "rwre/line_walk.hpp"

#include <algorithm>
#include <cmath>

#include "rwre/errors.hpp"
#include "rwre/rng.hpp"

namespace rwre {

namespace {

// Neumaier summation.
class Sum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Cumulative log-potential relative to site lo+1: w_j = V(j+1) - V(lo+1),
// the log of the resistance of edge (j, j+1), for j = lo..hi-1.
std::vector<double> log_resistances(const LineEnv& env, std::int64_t lo, std::int64_t hi) {
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(hi - lo));
  double acc = 0.0;
  w.push_back(0.0);
  for (std::int64_t j = lo + 1; j < hi; ++j) {
    acc -= std::log(env.a(static_cast<std::size_t>(j)));
    w.push_back(acc);
  }
  return w;
}

void check_interval(const LineEnv& env, std::int64_t start, std::int64_t lo, std::int64_t hi) {
  if (lo >= hi) throw PreconditionViolation("degenerate interval: lo must be below hi");
  if (lo < -1 || hi > static_cast<std::int64_t>(env.size())) {
    throw OutOfRange("interval [" + std::to_string(lo) + ", " + std::to_string(hi) + "] outside the environment");
  }
  if (start < lo || start > hi) throw OutOfRange("start outside [lo, hi]");
}

// Sum of exp(w_j - shift) for j in [from, to).
double shifted_sum(const std::vector<double>& w, std::size_t from, std::size_t to, double shift) {
  Sum s;
  for (std::size_t j = from; j < to; ++j) s.add(std::exp(w[j] - shift));
  return s.value();
}

}  // namespace

LineEnv::LineEnv(std::vector<double> a_values) : a_(std::move(a_values)) {
  if (a_.empty()) throw InvalidModel("line environment needs at least one site");
  for (double a : a_) {
    if (!(a > 0.0) || !std::isfinite(a)) throw InvalidModel("line environment values must be positive and finite");
  }
}

Potential::Potential(const LineEnv& env) {
  v_.assign(env.size() + 1, 0.0);
  for (std::size_t l = 1; l <= env.size(); ++l) v_[l] = v_[l - 1] - std::log(env.a(l - 1));
  h1_.assign(v_.size(), 0.0);
  double run_max = v_[0];
  for (std::size_t l = 0; l < v_.size(); ++l) {
    run_max = std::max(run_max, v_[l]);
    h1_[l] = run_max - v_[l];
  }
}

double Potential::h2(std::size_t l, std::size_t k) const {
  if (l > k || k >= v_.size()) throw OutOfRange("h2 needs l <= k <= size");
  return *std::max_element(v_.begin() + static_cast<std::ptrdiff_t>(l), v_.begin() + static_cast<std::ptrdiff_t>(k) + 1) -
         v_[l];
}

double hit_before(const LineEnv& env, std::int64_t start, std::int64_t lo, std::int64_t hi) {
  check_interval(env, start, lo, hi);
  if (start == hi) return 1.0;
  if (start == lo) return 0.0;
  const auto w = log_resistances(env, lo, hi);
  const double shift = *std::max_element(w.begin(), w.end());
  const auto split = static_cast<std::size_t>(start - lo);
  return shifted_sum(w, 0, split, shift) / shifted_sum(w, 0, w.size(), shift);
}

double hit_low_before(const LineEnv& env, std::int64_t start, std::int64_t lo, std::int64_t hi) {
  check_interval(env, start, lo, hi);
  if (start == hi) return 0.0;
  if (start == lo) return 1.0;
  const auto w = log_resistances(env, lo, hi);
  const double shift = *std::max_element(w.begin(), w.end());
  const auto split = static_cast<std::size_t>(start - lo);
  return shifted_sum(w, split, w.size(), shift) / shifted_sum(w, 0, w.size(), shift);
}

double return_escape(const LineEnv& env, std::int64_t l, std::int64_t k) {
  if (l < 0 || l > k) throw OutOfRange("return_escape needs 0 <= l <= k");
  if (l >= static_cast<std::int64_t>(env.size()) || k > static_cast<std::int64_t>(env.size())) {
    throw OutOfRange("return_escape sites outside the environment");
  }
  if (l == 0 && k == 0) return 0.0;
  const double up = env.right(static_cast<std::size_t>(l));
  const double down = 1.0 - up;
  if (l == 0) return up * hit_before(env, 1, 0, k);
  if (l == k) return down * hit_low_before(env, l - 1, 0, l);
  return up * hit_before(env, l + 1, l, k) + down * hit_low_before(env, l - 1, 0, l);
}

PlknEstimate p_lkn(const ModelSpec& model, std::int64_t l, std::int64_t k, std::uint64_t n,
                   const PlknOptions& options) {
  if (!(options.c7 > 0.0 && options.c7 < 1.0)) throw PreconditionViolation("c7 must lie in (0,1)");
  if (options.env_samples == 0) throw InvalidConfig("p_lkn needs at least one environment sample");
  if (l < 0 || l > k) throw OutOfRange("p_lkn needs 0 <= l <= k");
  PlknEstimate out;
  out.values.reserve(options.env_samples);
  Sum total;
  std::vector<double> a(static_cast<std::size_t>(k) + 1);
  for (std::uint64_t s = 0; s < options.env_samples; ++s) {
    CounterStream stream(derive_seed(options.seed, s));
    for (auto& x : a) x = model.env.sample(stream.uniform());
    const double p = return_escape(LineEnv(a), l, k);
    const double v = std::pow(1.0 - options.c7 * p, static_cast<double>(n));
    out.values.push_back(v);
    total.add(v);
  }
  const double nd = static_cast<double>(options.env_samples);
  out.estimate = total.value() / nd;
  if (options.env_samples > 1) {
    Sum ss;
    for (double v : out.values) ss.add((v - out.estimate) * (v - out.estimate));
    out.std_error = std::sqrt(ss.value() / (nd - 1.0) / nd);
  }
  return out;
}

double ruin_escape(double p_up, std::uint64_t h) {
  if (!(p_up > 0.0 && p_up < 1.0)) throw PreconditionViolation("p_up must lie in (0,1)");
  if (h < 1) throw PreconditionViolation("h must be >= 1");
  const double rho = (1.0 - p_up) / p_up;
  if (h > 1'000'000) {
    const double geo = rho == 1.0 ? static_cast<double>(h) + 1.0
                                  : -std::expm1(static_cast<double>(h + 1) * std::log(rho)) / (1.0 - rho);
    return 1.0 - 1.0 / geo;
  }
  Sum s;
  double term = 1.0;
  for (std::uint64_t i = 0; i <= h; ++i) {
    s.add(term);
    term *= rho;
    if (term == 0.0 || !std::isfinite(s.value())) break;
  }
  return 1.0 - 1.0 / s.value();
}

}  // namespace rwre
