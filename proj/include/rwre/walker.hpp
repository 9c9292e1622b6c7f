#pragma once

// Quenched random walk on a LazyTree, the never-return rejection sampler,
// and the level coupling with a homogeneous biased walk.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rwre/rng.hpp"
#include "rwre/tree_env.hpp"

namespace rwre {

enum class WalkStatus { running, reached_level, budget_exhausted, exited_root };

std::string_view to_string(WalkStatus status) noexcept;

struct StopRule {
  std::optional<std::int32_t> level;     // stop on the first visit of this generation
  std::uint64_t max_steps = 10'000'000;  // horizon, counted from the start of the walk
  bool stop_on_root_exit = false;        // stop when D(e) occurs
};

struct Trajectory {
  std::vector<std::int32_t> level_profile{0};  // |X_k|; -1 while at the root's parent
  std::vector<std::uint64_t> tau{0};           // tau[n]: first step with |X_k| = n
  std::vector<std::uint32_t> fresh_nu;         // nu(X_{tau[n]})
  NodeId current;
  bool at_parent_of_root = false;
  std::optional<std::uint64_t> exited_root;    // D(e)
  // Visit counts N(x); filled only when WalkOptions::record_local_time.
  std::map<NodeId, std::uint64_t> local_time;
  std::uint64_t parent_of_root_visits = 0;
  std::uint64_t horizon = 0;
  WalkStatus status = WalkStatus::running;

  std::uint64_t steps() const noexcept { return level_profile.size() - 1; }
  std::int32_t level() const noexcept { return level_profile.back(); }
  std::int32_t max_level() const noexcept { return static_cast<std::int32_t>(tau.size()) - 1; }
};

struct WalkOptions {
  bool record_local_time = false;
};

class Walker {
 public:
  Walker(LazyTree& tree, std::uint64_t walk_seed, WalkOptions options = {});

  // Runs until a stop condition holds; budget exhaustion is a normal status.
  WalkStatus advance(const StopRule& stop);

  // One transition driven by the uniform u: child i when the partial sums
  // of omega(x, x_1..x_i) bracket u, the parent otherwise.
  void step_with(double u);

  const Trajectory& trajectory();
  Trajectory take();

  LazyTree& tree() noexcept { return *tree_; }
  LazyTree::Handle position() const noexcept { return pos_; }

 private:
  void flush_local_time();

  LazyTree* tree_;
  WalkRng rng_;
  WalkOptions options_;
  LazyTree::Handle pos_;
  Trajectory traj_;
  std::unordered_map<LazyTree::Handle, std::uint64_t> visits_;
};

Trajectory run(LazyTree& tree, std::uint64_t walk_seed, const StopRule& stop, WalkOptions options = {});

enum class EnvPolicy { annealed, quenched };

struct SamplerConfig {
  EnvPolicy policy = EnvPolicy::annealed;
  std::uint64_t tree_seed = 1;  // fixed tree (quenched) or base of per-attempt trees (annealed)
  std::uint64_t walk_seed = 2;
  std::uint64_t horizon = 10'000'000;
  std::int32_t level_cut = 50;
  TreeOptions tree_options{};
  std::uint64_t starvation_attempts = 100'000;
  double starvation_rate = 1e-4;
};

struct SamplerTelemetry {
  std::uint64_t attempts = 0;
  std::uint64_t accepted = 0;
  std::uint64_t exited_before_cut = 0;
  std::uint64_t horizon_before_cut = 0;
  std::uint64_t exited_after_cut = 0;  // rejected during a continuation

  double acceptance_rate() const noexcept {
    return attempts == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(attempts);
  }
  SamplerTelemetry& operator+=(const SamplerTelemetry& o) noexcept;
};

struct ConditionedDraw {
  Trajectory trajectory;
  std::uint64_t tree_seed;
  std::uint64_t walk_seed;
  std::uint64_t attempt;
};

// Optional extension of an accepted walk (e.g. until a regeneration is
// confirmed). A root exit during the continuation rejects the draw.
using Continuation = std::function<void(Walker&)>;

// Approximates the law conditioned on D(e) = infinity by rejection: a draw
// is kept when the walk reaches `level_cut` before exiting the root and
// before the horizon. Draw `stream` uses seeds derived from
// (seed, stream, attempt), so a draw does not depend on which worker runs it.
class ConditionedSampler {
 public:
  ConditionedSampler(ModelSpec model, SamplerConfig config, std::uint64_t stream = 0);

  ConditionedDraw next(const Continuation& continuation = {});
  void set_stream(std::uint64_t stream) noexcept {
    stream_ = stream;
    attempt_ = 0;
  }
  const SamplerTelemetry& telemetry() const noexcept { return telemetry_; }
  const SamplerConfig& config() const noexcept { return config_; }

 private:
  ModelSpec model_;
  SamplerConfig config_;
  std::uint64_t stream_;
  std::uint64_t attempt_ = 0;
  std::optional<LazyTree> quenched_tree_;
  SamplerTelemetry telemetry_;
};

ConditionedDraw sample_conditioned_never_return(ConditionedSampler& sampler,
                                                const Continuation& continuation = {});

struct CoupledPaths {
  Trajectory walk;
  std::vector<std::int64_t> biased;  // Y_0..Y_steps
  double p_up;                       // i nu_min / (1 + i nu_min)
};

/// Drives the tree walk and the biased walk Y with one shared uniform
/// sequence (Y steps up iff u_k <= p_up). Requires i * nu_min > 1.
CoupledPaths coupled_run_with_biased_walk(LazyTree& tree, std::uint64_t walk_seed, std::uint64_t steps);

}  // namespace rwre
