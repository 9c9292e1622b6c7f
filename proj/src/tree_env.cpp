#include "rwre/tree_env.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "rwre/errors.hpp"
#include "rwre/format.hpp"
#include "rwre/rng.hpp"

namespace rwre {

namespace {

constexpr std::uint64_t kRootTag = 0x726f6f74ULL;

std::uint64_t root_key(std::uint64_t master_seed) { return derive_seed(master_seed, kRootTag); }

// Draws nu and the children's A-values from the vertex stream, then the
// transition probabilities.
template <class Sink>
void sample_vertex(const ModelSpec& model, std::uint64_t key, Sink&& sink) {
  CounterStream stream(key);
  const std::uint32_t nu = model.offspring.sample(stream.uniform());
  double sum_a = 0.0;
  std::vector<double> a(nu);
  for (auto& v : a) {
    v = model.env.sample(stream.uniform());
    sum_a += v;
  }
  const double denom = 1.0 + sum_a;
  sink(nu, a, denom);
}

}  // namespace

NodeId::NodeId(std::vector<std::uint32_t> path) : path_(std::move(path)) {
  for (auto i : path_) {
    if (i == 0) throw OutOfRange("NodeId child indices start at 1");
  }
}

NodeId NodeId::parent() const {
  if (is_root()) throw OutOfRange("the root has no parent vertex in the tree");
  return NodeId(std::vector<std::uint32_t>(path_.begin(), path_.end() - 1));
}

NodeId NodeId::child(std::uint32_t index) const {
  auto p = path_;
  p.push_back(index);
  return NodeId(std::move(p));
}

std::string NodeId::to_string() const {
  if (path_.empty()) return "e";
  std::string out;
  for (std::size_t i = 0; i < path_.size(); ++i) {
    if (i) out += '.';
    out += std::to_string(path_[i]);
  }
  return out;
}

VertexState vertex_state(const ModelSpec& model, std::uint64_t master_seed, const NodeId& x) {
  std::uint64_t key = root_key(master_seed);
  for (auto i : x.path()) {
    // Walking down requires the index to exist at every ancestor.
    std::uint32_t nu = 0;
    sample_vertex(model, key, [&](std::uint32_t n, const std::vector<double>&, double) { nu = n; });
    if (i > nu) throw OutOfRange("NodeId " + x.to_string() + " does not exist in this tree");
    key = derive_seed(key, i);
  }
  VertexState st;
  sample_vertex(model, key, [&](std::uint32_t nu, const std::vector<double>& a, double denom) {
    st.nu = nu;
    st.child_weights = a;
    st.trans_children.resize(nu);
    for (std::uint32_t i = 0; i < nu; ++i) st.trans_children[i] = a[i] / denom;
    st.trans_parent = 1.0 / denom;
  });
  return st;
}

LazyTree::LazyTree(ModelSpec model, std::uint64_t master_seed, TreeOptions options)
    : model_(std::move(model)), master_seed_(master_seed), options_(options) {
  add_vertex(root_key(master_seed_), kNone, 0, 0);
}

LazyTree::Handle LazyTree::add_vertex(std::uint64_t key, Handle parent, std::uint32_t generation,
                                      std::uint32_t index) {
  if (slots_.size() >= kNone) throw BudgetExceeded("LazyTree handle space exhausted");
  const Handle h = static_cast<Handle>(slots_.size());
  const std::size_t offset = weights_.size();
  sample_vertex(model_, key, [&](std::uint32_t nu, const std::vector<double>& a, double denom) {
    slots_.push_back({key, parent, generation, nu, index, offset, 1.0 / denom});
    for (double v : a) {
      weights_.push_back(v);
      trans_.push_back(v / denom);
      children_.push_back(kNone);
    }
  });
  return h;
}

LazyTree::Handle LazyTree::child(Handle h, std::uint32_t index) {
  const Slot& s = slots_[h];
  if (index == 0 || index > s.nu) throw OutOfRange("child index out of range");
  const std::size_t pos = s.offset + index - 1;
  if (children_[pos] == kNone) {
    const std::uint64_t key = derive_seed(s.key, index);
    const std::uint32_t gen = s.generation + 1;
    const Handle c = add_vertex(key, h, gen, index);
    children_[pos] = c;
  }
  return children_[pos];
}

NodeId LazyTree::node_id(Handle h) const {
  std::vector<std::uint32_t> path(slots_[h].generation);
  for (Handle cur = h; slots_[cur].parent != kNone; cur = slots_[cur].parent) {
    path[slots_[cur].generation - 1] = slots_[cur].index;
  }
  return NodeId(std::move(path));
}

VertexState LazyTree::state(Handle h) const {
  VertexState st;
  st.nu = slots_[h].nu;
  const auto w = child_weights(h);
  const auto t = trans_children(h);
  st.child_weights.assign(w.begin(), w.end());
  st.trans_children.assign(t.begin(), t.end());
  st.trans_parent = slots_[h].trans_parent;
  return st;
}

VertexState LazyTree::materialize(const NodeId& x) {
  Handle h = root();
  for (auto i : x.path()) {
    if (i > nu(h)) throw OutOfRange("NodeId " + x.to_string() + " does not exist in this tree");
    h = child(h, i);
  }
  return state(h);
}

LazyTree::Handle LazyTree::trim(Handle keep) {
  std::vector<Handle> chain;
  for (Handle cur = keep; cur != kNone; cur = slots_[cur].parent) chain.push_back(cur);
  std::reverse(chain.begin(), chain.end());

  std::vector<Slot> old_slots = std::move(slots_);
  std::vector<double> old_weights = std::move(weights_);
  std::vector<double> old_trans = std::move(trans_);
  slots_.clear();
  weights_.clear();
  trans_.clear();
  children_.clear();

  Handle prev = kNone;
  for (Handle old : chain) {
    const Slot& s = old_slots[old];
    const Handle h = static_cast<Handle>(slots_.size());
    slots_.push_back({s.key, prev, s.generation, s.nu, s.index, weights_.size(), s.trans_parent});
    for (std::uint32_t i = 0; i < s.nu; ++i) {
      weights_.push_back(old_weights[s.offset + i]);
      trans_.push_back(old_trans[s.offset + i]);
      children_.push_back(kNone);
    }
    if (prev != kNone) children_[slots_[prev].offset + s.index - 1] = h;
    prev = h;
  }
  return prev;
}

void LazyTree::clear() {
  slots_.clear();
  weights_.clear();
  trans_.clear();
  children_.clear();
  add_vertex(root_key(master_seed_), kNone, 0, 0);
}

NodeId TruncatedTree::node_id(std::size_t i) const {
  std::vector<std::uint32_t> path(generation[i]);
  for (std::size_t cur = i; parent[cur] != kNone; cur = parent[cur]) {
    path[generation[cur] - 1] = child_index[cur];
  }
  return NodeId(std::move(path));
}

TruncatedTree enumerate_to_depth(LazyTree& tree, std::uint32_t depth, std::size_t node_budget) {
  const double m = tree.model().offspring.mean();
  double expected = 0.0;
  double level = 1.0;
  for (std::uint32_t g = 0; g <= depth; ++g) {
    expected += level;
    level *= m;
  }
  if (expected > static_cast<double>(node_budget)) {
    throw BudgetExceeded("expected truncated tree size " + format_number(expected) + " exceeds node budget " +
                         std::to_string(node_budget));
  }

  TruncatedTree out;
  out.depth = depth;
  std::vector<LazyTree::Handle> handles;
  auto push = [&](LazyTree::Handle h, std::uint32_t parent, std::uint32_t index, double a, double down) {
    handles.push_back(h);
    out.parent.push_back(parent);
    out.generation.push_back(tree.generation(h));
    out.child_index.push_back(index);
    out.first_child.push_back(TruncatedTree::kNone);
    out.child_count.push_back(0);
    out.nu.push_back(tree.nu(h));
    out.a_value.push_back(a);
    out.trans_down.push_back(down);
    out.trans_parent.push_back(tree.trans_parent(h));
  };
  push(tree.root(), TruncatedTree::kNone, 0, std::nan(""), 0.0);
  out.level_begin.push_back(0);

  std::size_t begin = 0;
  for (std::uint32_t g = 0; g < depth; ++g) {
    const std::size_t end = handles.size();
    out.level_begin.push_back(end);
    for (std::size_t v = begin; v < end; ++v) {
      const auto h = handles[v];
      const std::uint32_t nu = tree.nu(h);
      out.first_child[v] = static_cast<std::uint32_t>(handles.size());
      out.child_count[v] = nu;
      if (handles.size() + nu > node_budget) {
        throw BudgetExceeded("truncated tree exceeds node budget " + std::to_string(node_budget));
      }
      // Copy out before child() may reallocate the tree's pools.
      const std::vector<double> a(tree.child_weights(h).begin(), tree.child_weights(h).end());
      const std::vector<double> w(tree.trans_children(h).begin(), tree.trans_children(h).end());
      for (std::uint32_t i = 1; i <= nu; ++i) {
        const auto c = tree.child(h, i);
        push(c, static_cast<std::uint32_t>(v), i, a[i - 1], w[i - 1]);
      }
    }
    begin = end;
  }
  out.level_begin.push_back(handles.size());
  return out;
}

void write_edge_list(const TruncatedTree& tree, std::ostream& out) {
  out << "# parent_path\tchild_index\ta_value\tomega_down\tomega_up\n";
  for (std::size_t i = 1; i < tree.size(); ++i) {
    out << tree.node_id(tree.parent[i]).to_string() << '\t' << tree.child_index[i] << '\t'
        << format_number(tree.a_value[i]) << '\t' << format_number(tree.trans_down[i]) << '\t'
        << format_number(tree.trans_parent[i]) << '\n';
  }
}

}  // namespace rwre
