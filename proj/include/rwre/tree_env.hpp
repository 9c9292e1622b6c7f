#pragma once

// Lazily materialized Galton-Watson tree carrying the random environment.
//
// Every vertex draws its child count and its children's A-values from a
// counter-based stream keyed by (master seed, path word), so a vertex is a
// pure function of its path: the order in which vertices are visited, cache
// eviction and re-materialization never change the environment.

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rwre/model.hpp"

namespace rwre {

// Path word from the root; entries are child indices starting at 1.
class NodeId {
 public:
  NodeId() = default;
  explicit NodeId(std::vector<std::uint32_t> path);

  static NodeId root() { return NodeId(); }

  std::size_t generation() const noexcept { return path_.size(); }
  bool is_root() const noexcept { return path_.empty(); }
  NodeId parent() const;
  NodeId child(std::uint32_t index) const;
  const std::vector<std::uint32_t>& path() const noexcept { return path_; }

  // "e" for the root, otherwise dot-separated indices ("1.2.1").
  std::string to_string() const;

  auto operator<=>(const NodeId&) const = default;

 private:
  std::vector<std::uint32_t> path_;
};

struct VertexState {
  std::uint32_t nu = 0;
  std::vector<double> child_weights;   // A(x_i)
  std::vector<double> trans_children;  // omega(x, x_i)
  double trans_parent = 0.0;           // omega(x, parent)
};

/// Computes the vertex at `x` directly from (model, master_seed), without a cache.
VertexState vertex_state(const ModelSpec& model, std::uint64_t master_seed, const NodeId& x);

struct TreeOptions {
  // 0 = unbounded. When positive, owners may call trim() once cached()
  // exceeds it; only the path to a kept vertex survives.
  std::size_t max_cached = 0;
};

class LazyTree {
 public:
  using Handle = std::uint32_t;
  static constexpr Handle kNone = std::numeric_limits<Handle>::max();

  LazyTree(ModelSpec model, std::uint64_t master_seed, TreeOptions options = {});

  const ModelSpec& model() const noexcept { return model_; }
  std::uint64_t master_seed() const noexcept { return master_seed_; }
  const TreeOptions& options() const noexcept { return options_; }

  VertexState materialize(const NodeId& x);

  // Handle-level access used by the walkers. Handles stay valid until
  // trim() or clear().
  Handle root() const noexcept { return 0; }
  Handle child(Handle h, std::uint32_t index);  // index in [1, nu]
  Handle parent(Handle h) const noexcept { return slots_[h].parent; }
  std::uint32_t generation(Handle h) const noexcept { return slots_[h].generation; }
  std::uint32_t nu(Handle h) const noexcept { return slots_[h].nu; }
  double trans_parent(Handle h) const noexcept { return slots_[h].trans_parent; }
  std::span<const double> trans_children(Handle h) const noexcept {
    return {trans_.data() + slots_[h].offset, slots_[h].nu};
  }
  std::span<const double> child_weights(Handle h) const noexcept {
    return {weights_.data() + slots_[h].offset, slots_[h].nu};
  }
  NodeId node_id(Handle h) const;
  VertexState state(Handle h) const;

  std::size_t cached() const noexcept { return slots_.size(); }
  bool over_capacity() const noexcept {
    return options_.max_cached > 0 && slots_.size() > options_.max_cached;
  }

  // Drops every cached vertex except the ancestors of `keep` (inclusive).
  // Returns the new handle of `keep`; all other handles are invalidated.
  Handle trim(Handle keep);
  void clear();

 private:
  struct Slot {
    std::uint64_t key;
    Handle parent;
    std::uint32_t generation;
    std::uint32_t nu;
    std::uint32_t index;   // child index within parent, 0 for root
    std::size_t offset;    // into weights_/trans_/children_
    double trans_parent;
  };

  Handle add_vertex(std::uint64_t key, Handle parent, std::uint32_t generation, std::uint32_t index);

  ModelSpec model_;
  std::uint64_t master_seed_;
  TreeOptions options_;
  std::vector<Slot> slots_;
  std::vector<double> weights_;
  std::vector<double> trans_;
  std::vector<Handle> children_;
};

// Full tree truncated at generation `depth`, in breadth-first order.
struct TruncatedTree {
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

  std::uint32_t depth = 0;
  std::vector<std::uint32_t> parent;       // kNone for the root
  std::vector<std::uint32_t> generation;
  std::vector<std::uint32_t> child_index;  // 1-based, 0 for the root
  std::vector<std::uint32_t> first_child;  // meaningful when child_count > 0
  std::vector<std::uint32_t> child_count;  // 0 for vertices at `depth`
  std::vector<std::uint32_t> nu;           // true child count, also at `depth`
  std::vector<double> a_value;             // A(x); NaN at the root
  std::vector<double> trans_down;          // omega(parent(x), x); 0 at the root
  std::vector<double> trans_parent;        // omega(x, parent(x))
  std::vector<std::size_t> level_begin;    // size depth + 2

  std::size_t size() const noexcept { return parent.size(); }
  std::size_t level_size(std::uint32_t g) const noexcept { return level_begin[g + 1] - level_begin[g]; }
  NodeId node_id(std::size_t i) const;
};

inline constexpr std::size_t kDefaultNodeBudget = 1'000'000;

/// Materializes every vertex with generation <= depth.
/// Throws BudgetExceeded when the expected or actual size exceeds `node_budget`.
TruncatedTree enumerate_to_depth(LazyTree& tree, std::uint32_t depth,
                                 std::size_t node_budget = kDefaultNodeBudget);

/// Edge-list text export, one edge per line, tab separated:
///   parent_path  child_index  a_value  omega_down  omega_up
/// where omega_down = omega(parent, child) and omega_up = omega(child, parent).
/// Lines starting with '#' are comments.
void write_edge_list(const TruncatedTree& tree, std::ostream& out);

}  // namespace rwre
