#include "rwre/quenched_exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rwre/errors.hpp"
#include "rwre/format.hpp"
#include "rwre/rng.hpp"

namespace rwre {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t window_end(double b, std::uint32_t n) {
  return static_cast<std::uint64_t>(std::floor(b * n + 1e-9));
}

CountEstimate summarize(std::vector<std::uint64_t> counts) {
  CountEstimate out;
  const double nd = static_cast<double>(counts.size());
  double sum = 0.0;
  for (auto c : counts) sum += static_cast<double>(c);
  out.estimate = sum / nd;
  if (counts.size() > 1) {
    double ss = 0.0;
    for (auto c : counts) ss += (static_cast<double>(c) - out.estimate) * (static_cast<double>(c) - out.estimate);
    out.std_error = std::sqrt(ss / (nd - 1.0) / nd);
  }
  out.counts = std::move(counts);
  return out;
}

double quantile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::vector<std::uint32_t> default_depth_schedule(std::uint32_t max_depth) {
  std::vector<std::uint32_t> out(max_depth);
  for (std::uint32_t d = 0; d < max_depth; ++d) out[d] = d + 1;
  return out;
}

BetaEstimate beta_sequence(LazyTree& tree, const NodeId& x, std::span<const std::uint32_t> depth_schedule,
                           double tol, std::size_t node_budget) {
  LazyTree::Handle start = tree.root();
  for (auto i : x.path()) {
    if (i > tree.nu(start)) throw OutOfRange("NodeId " + x.to_string() + " does not exist in this tree");
    start = tree.child(start, i);
  }

  BetaEstimate est;
  const auto& model = tree.model();
  const double floor = model.env.ess_inf() * model.offspring.nu_min();
  if (floor > 1.0) est.lower_bound = 1.0 - 1.0 / floor;

  // levels[l] lists the subtree's generation-l vertices (relative to x) in
  // BFS order, so the children of levels[l][j] are contiguous in levels[l+1].
  std::vector<std::vector<LazyTree::Handle>> levels{{start}};
  std::vector<std::vector<std::size_t>> first{};
  std::size_t total = 1;

  std::vector<double> val, next_val;
  for (const std::uint32_t d : depth_schedule) {
    bool out_of_budget = false;
    while (levels.size() <= d) {
      const auto& cur = levels.back();
      std::size_t need = 0;
      for (auto h : cur) need += tree.nu(h);
      if (total + need > node_budget) {
        out_of_budget = true;
        break;
      }
      std::vector<LazyTree::Handle> next;
      std::vector<std::size_t> starts;
      next.reserve(need);
      starts.reserve(cur.size());
      for (auto h : cur) {
        starts.push_back(next.size());
        const std::uint32_t nu = tree.nu(h);
        for (std::uint32_t i = 1; i <= nu; ++i) next.push_back(tree.child(h, i));
      }
      total += need;
      first.push_back(std::move(starts));
      levels.push_back(std::move(next));
    }
    if (out_of_budget) break;

    next_val.assign(levels[d].size(), 1.0);
    for (std::size_t l = d; l-- > 0;) {
      val.resize(levels[l].size());
      for (std::size_t j = 0; j < levels[l].size(); ++j) {
        const auto a = tree.child_weights(levels[l][j]);
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * next_val[first[l][j] + i];
        val[j] = s / (1.0 + s);
      }
      std::swap(val, next_val);
    }
    const double prev = est.upper.empty() ? 1.0 : est.upper.back();
    est.depths.push_back(d);
    est.upper.push_back(next_val[0]);
    est.value = next_val[0];
    est.gap = std::abs(prev - est.value);
    if (est.gap < tol) {
      est.converged = true;
      break;
    }
  }
  return est;
}

BetaEstimate beta(LazyTree& tree, const NodeId& x, std::span<const std::uint32_t> depth_schedule, double tol,
                  std::size_t node_budget) {
  auto est = beta_sequence(tree, x, depth_schedule, tol, node_budget);
  if (!est.converged) {
    throw NoConvergence("beta recursion did not reach tolerance " + format_number(tol) + "; last gap " +
                            format_number(est.gap),
                        est.gap);
  }
  return est;
}

double gamma_from_beta(const VertexState& vertex, std::span<const double> child_betas) {
  if (child_betas.size() != vertex.nu || vertex.trans_children.size() != vertex.nu) {
    throw LengthMismatch("expected " + std::to_string(vertex.nu) + " child betas, got " +
                         std::to_string(child_betas.size()));
  }
  double g = 0.0;
  for (std::size_t k = 0; k < child_betas.size(); ++k) g += vertex.trans_children[k] * child_betas[k];
  return g;
}

double PassageDistribution::arrived_by(std::size_t leaf, std::uint64_t t) const {
  const auto& row = arrival[leaf];
  const std::uint64_t end = std::min<std::uint64_t>(t, row.size() - 1);
  double s = 0.0;
  for (std::uint64_t k = 0; k <= end; ++k) s += row[k];
  return s;
}

PassageDistribution passage_distribution(const TruncatedTree& tree, std::uint64_t t_max) {
  const std::uint32_t n = tree.depth;
  if (n < 1) throw PreconditionViolation("passage distribution needs a truncation depth >= 1");
  if (t_max < n) throw PreconditionViolation("t_max must be at least the truncation depth");

  PassageDistribution out;
  out.n = n;
  out.t_max = t_max;
  const std::size_t transient = tree.level_begin[n];
  const std::size_t leaf_begin = tree.level_begin[n];
  const std::size_t leaf_count = tree.level_size(n);
  out.leaves.reserve(leaf_count);
  for (std::size_t j = 0; j < leaf_count; ++j) out.leaves.push_back(tree.node_id(leaf_begin + j));
  out.arrival.assign(leaf_count, std::vector<double>(t_max + 1, 0.0));
  out.root_absorbed.assign(t_max + 1, 0.0);
  out.running.assign(t_max + 1, 0.0);
  out.running[0] = 1.0;

  std::vector<double> p(transient, 0.0), q(transient, 0.0);
  p[0] = 1.0;
  double arrived = 0.0;
  double absorbed = 0.0;
  for (std::uint64_t t = 1; t <= t_max; ++t) {
    std::fill(q.begin(), q.end(), 0.0);
    for (std::size_t v = 0; v < transient; ++v) {
      const double mass = p[v];
      if (mass == 0.0) continue;
      const std::size_t c0 = tree.first_child[v];
      for (std::uint32_t i = 0; i < tree.child_count[v]; ++i) {
        const std::size_t c = c0 + i;
        const double flow = mass * tree.trans_down[c];
        if (c >= leaf_begin) {
          out.arrival[c - leaf_begin][t] += flow;
          arrived += flow;
        } else {
          q[c] += flow;
        }
      }
      const double up = mass * tree.trans_parent[v];
      if (v == 0) {
        absorbed += up;
      } else {
        q[tree.parent[v]] += up;
      }
    }
    std::swap(p, q);
    double running = 0.0;
    for (double m : p) running += m;
    out.root_absorbed[t] = absorbed;
    out.running[t] = running;
    out.max_mass_error = std::max(out.max_mass_error, std::abs(arrived + absorbed + running - 1.0));
  }
  return out;
}

std::uint64_t count_qualifying(const PassageDistribution& dist, double h, double b) {
  const std::uint64_t end = window_end(b, dist.n);
  if (end > dist.t_max) throw PreconditionViolation("passage distribution shorter than floor(b n)");
  const double threshold = std::exp(-h * dist.n);
  std::uint64_t count = 0;
  for (std::size_t j = 0; j < dist.leaves.size(); ++j) {
    if (dist.arrived_by(j, end) >= threshold) ++count;
  }
  return count;
}

std::vector<CountEstimate> en_hb_grid(const ModelSpec& model, std::span<const double> h_grid, double b,
                                      std::uint32_t n, std::uint64_t tree_samples, const EnOptions& options) {
  if (h_grid.empty() || tree_samples == 0) throw InvalidConfig("en_hb needs a non-empty h grid and tree samples");
  if (b < 1.0) throw PreconditionViolation("b must be >= 1");
  const std::uint64_t t_max = std::max<std::uint64_t>(window_end(b, n), n);
  std::vector<std::vector<std::uint64_t>> counts(h_grid.size(), std::vector<std::uint64_t>(tree_samples));
  parallel_for(tree_samples, options.threads, [&](std::size_t s) {
    LazyTree tree(model, derive_seed(options.seed, s));
    const auto trunc = enumerate_to_depth(tree, n, options.node_budget);
    const auto dist = passage_distribution(trunc, t_max);
    for (std::size_t j = 0; j < h_grid.size(); ++j) counts[j][s] = count_qualifying(dist, h_grid[j], b);
  });
  std::vector<CountEstimate> out;
  out.reserve(h_grid.size());
  for (auto& c : counts) out.push_back(summarize(std::move(c)));
  return out;
}

CountEstimate en_hb(const ModelSpec& model, double h, double b, std::uint32_t n, std::uint64_t tree_samples,
                    const EnOptions& options) {
  const double grid[] = {h};
  return std::move(en_hb_grid(model, grid, b, n, tree_samples, options).front());
}

RateCurve rate_curve(const ModelSpec& model, double b, std::span<const double> h_grid,
                     std::span<const std::uint32_t> k_list, std::uint64_t tree_samples, const EnOptions& options) {
  if (h_grid.empty() || k_list.empty()) throw InvalidConfig("rate curve needs non-empty h and k grids");
  if (!std::is_sorted(h_grid.begin(), h_grid.end()) || !std::is_sorted(k_list.begin(), k_list.end())) {
    throw InvalidConfig("rate curve grids must be sorted ascending");
  }
  RateCurve rc;
  rc.b = b;
  rc.h.assign(h_grid.begin(), h_grid.end());
  rc.log_e.assign(h_grid.size(), -kInf);
  rc.log_e_std_error.assign(h_grid.size(), 0.0);
  rc.best_k.assign(h_grid.size(), 0);

  for (const std::uint32_t k : k_list) {
    const auto est = en_hb_grid(model, h_grid, b, k, tree_samples, options);
    for (std::size_t j = 0; j < h_grid.size(); ++j) {
      RatePoint pt;
      pt.h = h_grid[j];
      pt.k = k;
      pt.e_k = est[j].estimate;
      pt.e_k_std_error = est[j].std_error;
      if (pt.e_k > 0.0) {
        pt.log_rate = std::log(pt.e_k) / k;
        pt.log_rate_std_error = pt.e_k_std_error / (pt.e_k * k);
        if (pt.log_rate > rc.log_e[j]) {
          rc.log_e[j] = pt.log_rate;
          rc.log_e_std_error[j] = pt.log_rate_std_error;
          rc.best_k[j] = k;
        }
        if (!rc.h_c || pt.h < *rc.h_c) rc.h_c = pt.h;
      } else {
        pt.log_rate = -kInf;
      }
      rc.grid.push_back(pt);
    }
  }

  auto sup = [&](bool restricted, double& value, double& se) -> std::optional<std::size_t> {
    std::optional<std::size_t> arg;
    double best = -kInf;
    for (std::size_t j = 0; j < rc.h.size(); ++j) {
      if (!std::isfinite(rc.log_e[j]) || (restricted && rc.log_e[j] <= 0.0)) continue;
      const double v = -rc.h[j] + rc.log_e[j];
      if (v > best) {
        best = v;
        arg = j;
      }
    }
    value = arg ? -best : kInf;
    se = arg ? rc.log_e_std_error[*arg] : 0.0;
    return arg;
  };
  const auto arg_a = sup(false, rc.ja, rc.ja_std_error);
  sup(true, rc.jq, rc.jq_std_error);
  if (arg_a) {
    const std::size_t j = *arg_a;
    if (j > 0) rc.h_resolution = std::max(rc.h_resolution, rc.h[j] - rc.h[j - 1]);
    if (j + 1 < rc.h.size()) rc.h_resolution = std::max(rc.h_resolution, rc.h[j + 1] - rc.h[j]);
  }
  return rc;
}

CascadeGrowth cascade_growth(const ModelSpec& model, std::uint32_t n, std::uint64_t tree_samples,
                             const EnOptions& options) {
  if (n < 1 || tree_samples == 0) throw InvalidConfig("cascade growth needs n >= 1 and tree samples");
  CascadeGrowth out;
  out.n = n;
  out.values.assign(tree_samples, 0.0);
  parallel_for(tree_samples, options.threads, [&](std::size_t s) {
    LazyTree tree(model, derive_seed(options.seed, s));
    const auto trunc = enumerate_to_depth(tree, n, options.node_budget);
    std::vector<double> prod(trunc.size(), 1.0);
    for (std::size_t v = 1; v < trunc.size(); ++v) prod[v] = prod[trunc.parent[v]] * trunc.trans_down[v];
    double sum = 0.0;
    for (std::size_t v = trunc.level_begin[n]; v < trunc.level_begin[n + 1]; ++v) sum += prod[v];
    out.values[s] = std::log(sum) / n;
  });
  auto sorted = out.values;
  std::sort(sorted.begin(), sorted.end());
  out.median = quantile(sorted, 0.5);
  out.lower_quartile = quantile(sorted, 0.25);
  out.upper_quartile = quantile(sorted, 0.75);
  const auto rate = rate_at_one(model);
  out.target = -rate.iq1;
  out.psi1 = rate.psi1;
  return out;
}

}  // namespace rwre
