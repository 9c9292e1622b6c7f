#pragma once

// Nearest-neighbour random walk in a random environment on Z: potentials,
// exact hitting probabilities, return/escape probabilities and the homogeneous
// biased-walk ruin formula.

#include <cstdint>
#include <vector>

#include "rwre/model.hpp"

namespace rwre {

// A(i) = omega(i, i+1) / omega(i, i-1) for sites i = 0..size-1; from site i
// the walk steps right with probability A(i)/(1+A(i)).
class LineEnv {
 public:
  explicit LineEnv(std::vector<double> a_values);

  const std::vector<double>& a_values() const noexcept { return a_; }
  std::size_t size() const noexcept { return a_.size(); }
  double a(std::size_t i) const { return a_.at(i); }
  double right(std::size_t i) const { return a_.at(i) / (1.0 + a_.at(i)); }

 private:
  std::vector<double> a_;
};

// V(0) = 0, V(l) = -sum_{i<l} ln A(i) for l = 0..size.
class Potential {
 public:
  explicit Potential(const LineEnv& env);

  const std::vector<double>& v() const noexcept { return v_; }
  const std::vector<double>& h1() const noexcept { return h1_; }
  double h1(std::size_t l) const { return h1_.at(l); }
  // max_{l <= i <= k} V(i) - V(l)
  double h2(std::size_t l, std::size_t k) const;

 private:
  std::vector<double> v_;
  std::vector<double> h1_;
};

/// P^start(T_hi < T_lo), for -1 <= lo <= start <= hi <= size and lo < hi.
/// Sums are shifted by their largest potential term and compensated, so
/// extreme potentials neither overflow nor cancel.
double hit_before(const LineEnv& env, std::int64_t start, std::int64_t lo, std::int64_t hi);

/// P^start(T_lo < T_hi), computed directly rather than as a complement.
double hit_low_before(const LineEnv& env, std::int64_t start, std::int64_t lo, std::int64_t hi);

/// P^l(T_l^* > T_0 ^ T_k) for 0 <= l <= k: the walk leaves l and reaches
/// {0, k} \ {l} before returning to l. Zero when l = k = 0.
double return_escape(const LineEnv& env, std::int64_t l, std::int64_t k);

struct PlknEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::vector<double> values;  // (1 - c7 P)^n per environment
};

struct PlknOptions {
  double c7 = 0.5;
  std::uint64_t env_samples = 10000;
  std::uint64_t seed = 1;
};

/// Monte Carlo over i.i.d. A(0..k) ~ model.env of (1 - c7 P^l(T_l^* > T_0 ^ T_k))^n.
PlknEstimate p_lkn(const ModelSpec& model, std::int64_t l, std::int64_t k, std::uint64_t n,
                   const PlknOptions& options = {});

/// Probability that the walk on Z stepping up with probability p_up, from 0,
/// hits -1 before h: 1 - 1/(1 + rho + ... + rho^h), rho = (1 - p_up)/p_up.
double ruin_escape(double p_up, std::uint64_t h);

}  // namespace rwre
