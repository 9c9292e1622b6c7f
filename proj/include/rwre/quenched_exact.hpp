#pragma once

// Exact quenched computations on truncated trees: the escape probability
// recursion, first-passage distributions, the leaf counts e_n(h,b), the
// empirical rate curve and the growth rate of the omega-product cascade.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rwre/model.hpp"
#include "rwre/parallel.hpp"
#include "rwre/tree_env.hpp"

namespace rwre {

struct BetaEstimate {
  std::vector<std::uint32_t> depths;  // truncation depth of each entry, relative to x
  std::vector<double> upper;          // boundary value 1 at the truncation leaves
  double value = 1.0;                 // last upper entry
  double gap = 1.0;                   // last successive difference
  std::optional<double> lower_bound;  // 1 - 1/(i nu_min) when i nu_min > 1
  bool converged = false;
};

/// Depths 1, 2, ..., max_depth.
std::vector<std::uint32_t> default_depth_schedule(std::uint32_t max_depth = 64);

/// Escape probability beta(x) = P^x(never hit the parent of x), evaluated
/// through 1/beta = 1 + 1/(sum_i A(x_i) beta(x_i)) on the subtree of x
/// truncated at each depth of the schedule. Stops once successive values
/// differ by less than `tol`. Throws NoConvergence (with the last gap) when
/// the schedule or the node budget runs out first.
BetaEstimate beta(LazyTree& tree, const NodeId& x, std::span<const std::uint32_t> depth_schedule, double tol,
                  std::size_t node_budget = kDefaultNodeBudget);

/// Same recursion without throwing; `converged` tells whether tol was met.
BetaEstimate beta_sequence(LazyTree& tree, const NodeId& x, std::span<const std::uint32_t> depth_schedule,
                           double tol, std::size_t node_budget = kDefaultNodeBudget);

/// sum_k omega(x, x_k) beta(x_k). Throws LengthMismatch unless one beta per child.
double gamma_from_beta(const VertexState& vertex, std::span<const double> child_betas);

// Law of the walk from the root of a tree truncated at generation n, with
// the level-n vertices and the root's parent absorbing.
struct PassageDistribution {
  std::uint32_t n = 0;
  std::uint64_t t_max = 0;
  std::vector<NodeId> leaves;
  // arrival[j][t] = P(tau_n = T_{leaves[j]} = t, no earlier visit to the root's parent)
  std::vector<std::vector<double>> arrival;
  std::vector<double> root_absorbed;  // cumulative, per t
  std::vector<double> running;        // per t
  double max_mass_error = 0.0;        // max_t |arrivals + absorbed + running - 1|

  double absorbed_at_root() const { return root_absorbed.back(); }
  double still_running() const { return running.back(); }
  // sum_{s <= t} arrival[j][s]
  double arrived_by(std::size_t leaf, std::uint64_t t) const;
};

/// Probability-vector propagation over the truncated tree (which must have
/// depth n >= 1); cost O(t_max x size). Requires t_max >= n.
PassageDistribution passage_distribution(const TruncatedTree& tree, std::uint64_t t_max);

/// Number of leaves with P(tau_n = T_x, tau_n <= floor(b n), no root exit) >= exp(-h n).
std::uint64_t count_qualifying(const PassageDistribution& dist, double h, double b);

struct CountEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::vector<std::uint64_t> counts;  // per sampled tree
};

struct EnOptions {
  std::uint64_t seed = 1;
  std::size_t node_budget = kDefaultNodeBudget;
  unsigned threads = default_threads();
};

/// Estimates e_n(h,b) by averaging qualifying-leaf counts over trees drawn
/// with seeds derive_seed(seed, tree index).
CountEstimate en_hb(const ModelSpec& model, double h, double b, std::uint32_t n, std::uint64_t tree_samples,
                    const EnOptions& options = {});

/// One estimate per h on the same sampled trees.
std::vector<CountEstimate> en_hb_grid(const ModelSpec& model, std::span<const double> h_grid, double b,
                                      std::uint32_t n, std::uint64_t tree_samples, const EnOptions& options = {});

struct RatePoint {
  double h = 0.0;
  std::uint32_t k = 0;
  double e_k = 0.0;
  double e_k_std_error = 0.0;
  double log_rate = 0.0;       // ln(e_k)/k, -inf when e_k = 0
  double log_rate_std_error = 0.0;
};

struct RateCurve {
  double b = 1.0;
  std::vector<RatePoint> grid;
  std::vector<double> h;
  std::vector<double> log_e;            // ln e(h,b) = max_k ln(e_k)/k
  std::vector<double> log_e_std_error;
  std::vector<std::uint32_t> best_k;    // 0 when every e_k vanished
  double ja = 0.0;
  double ja_std_error = 0.0;
  double jq = 0.0;                      // +inf when no h has ln e > 0
  double jq_std_error = 0.0;
  std::optional<double> h_c;            // smallest grid h with a nonzero estimate
  double h_resolution = 0.0;            // largest grid spacing next to the Ja maximizer
};

/// Requires non-empty sorted grids.
RateCurve rate_curve(const ModelSpec& model, double b, std::span<const double> h_grid,
                     std::span<const std::uint32_t> k_list, std::uint64_t tree_samples, const EnOptions& options = {});

struct CascadeGrowth {
  std::uint32_t n = 0;
  std::vector<double> values;  // (1/n) ln sum_{|x|=n} prod omega, per tree
  double median = 0.0;
  double lower_quartile = 0.0;
  double upper_quartile = 0.0;
  double target = 0.0;         // inf_{(0,1]} psi(theta)/theta = -I_q(1)
  double psi1 = 0.0;
};

CascadeGrowth cascade_growth(const ModelSpec& model, std::uint32_t n, std::uint64_t tree_samples,
                             const EnOptions& options = {});

}  // namespace rwre
