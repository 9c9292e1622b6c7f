#include "rwre/walker.hpp"

#include "rwre/errors.hpp"

namespace rwre {

std::string_view to_string(WalkStatus status) noexcept {
  switch (status) {
    case WalkStatus::running: return "running";
    case WalkStatus::reached_level: return "reached_level";
    case WalkStatus::budget_exhausted: return "budget_exhausted";
    case WalkStatus::exited_root: return "exited_root";
  }
  return "unknown";
}

Walker::Walker(LazyTree& tree, std::uint64_t walk_seed, WalkOptions options)
    : tree_(&tree), rng_(walk_seed), options_(options), pos_(tree.root()) {
  traj_.fresh_nu.push_back(tree_->nu(pos_));
  if (options_.record_local_time) visits_[pos_] = 1;
}

void Walker::step_with(double u) {
  const std::uint64_t k = traj_.steps() + 1;
  std::int32_t level = traj_.level();
  if (traj_.at_parent_of_root) {
    // omega(parent of e, e) = 1
    traj_.at_parent_of_root = false;
    pos_ = tree_->root();
    level = 0;
  } else {
    const auto w = tree_->trans_children(pos_);
    const auto nu = static_cast<std::uint32_t>(w.size());
    double acc = 0.0;
    std::uint32_t i = 0;
    for (; i < nu; ++i) {
      acc += w[i];
      if (u < acc) break;
    }
    if (i < nu) {
      pos_ = tree_->child(pos_, i + 1);
      ++level;
    } else if (pos_ == tree_->root()) {
      traj_.at_parent_of_root = true;
      level = -1;
      if (!traj_.exited_root) traj_.exited_root = k;
    } else {
      pos_ = tree_->parent(pos_);
      --level;
    }
  }
  traj_.level_profile.push_back(level);
  if (level > traj_.max_level()) {
    traj_.tau.push_back(k);
    traj_.fresh_nu.push_back(tree_->nu(pos_));
  }
  if (options_.record_local_time) {
    if (traj_.at_parent_of_root) {
      ++traj_.parent_of_root_visits;
    } else {
      ++visits_[pos_];
    }
  }
  if (tree_->over_capacity() && !traj_.at_parent_of_root) {
    flush_local_time();
    pos_ = tree_->trim(pos_);
  }
}

WalkStatus Walker::advance(const StopRule& stop) {
  traj_.horizon = stop.max_steps;
  auto done = [&]() -> bool {
    if (stop.level && traj_.level() == *stop.level) {
      traj_.status = WalkStatus::reached_level;
      return true;
    }
    if (stop.stop_on_root_exit && traj_.exited_root) {
      traj_.status = WalkStatus::exited_root;
      return true;
    }
    if (traj_.steps() >= stop.max_steps) {
      traj_.status = WalkStatus::budget_exhausted;
      return true;
    }
    return false;
  };
  traj_.status = WalkStatus::running;
  while (!done()) step_with(rng_.uniform());
  return traj_.status;
}

void Walker::flush_local_time() {
  for (const auto& [h, n] : visits_) traj_.local_time[tree_->node_id(h)] += n;
  visits_.clear();
}

const Trajectory& Walker::trajectory() {
  flush_local_time();
  traj_.current = traj_.at_parent_of_root ? NodeId::root() : tree_->node_id(pos_);
  return traj_;
}

Trajectory Walker::take() {
  trajectory();
  return std::move(traj_);
}

Trajectory run(LazyTree& tree, std::uint64_t walk_seed, const StopRule& stop, WalkOptions options) {
  Walker w(tree, walk_seed, options);
  w.advance(stop);
  return w.take();
}

SamplerTelemetry& SamplerTelemetry::operator+=(const SamplerTelemetry& o) noexcept {
  attempts += o.attempts;
  accepted += o.accepted;
  exited_before_cut += o.exited_before_cut;
  horizon_before_cut += o.horizon_before_cut;
  exited_after_cut += o.exited_after_cut;
  return *this;
}

ConditionedSampler::ConditionedSampler(ModelSpec model, SamplerConfig config, std::uint64_t stream)
    : model_(std::move(model)), config_(config), stream_(stream) {
  if (!classify(model_).transient) {
    throw PreconditionViolation("conditioned sampler requires a transient model");
  }
  if (config_.level_cut < 1) throw PreconditionViolation("level_cut must be >= 1");
  if (config_.policy == EnvPolicy::quenched) {
    quenched_tree_.emplace(model_, config_.tree_seed, config_.tree_options);
  }
}

ConditionedDraw ConditionedSampler::next(const Continuation& continuation) {
  for (;;) {
    const std::uint64_t attempt = attempt_++;
    ++telemetry_.attempts;
    const std::uint64_t walk_seed = derive_seed(config_.walk_seed, stream_, attempt);
    const std::uint64_t tree_seed = config_.policy == EnvPolicy::quenched
                                        ? config_.tree_seed
                                        : derive_seed(config_.tree_seed, stream_, attempt);
    std::optional<LazyTree> fresh;
    LazyTree* tree = nullptr;
    if (quenched_tree_) {
      tree = &*quenched_tree_;
    } else {
      fresh.emplace(model_, tree_seed, config_.tree_options);
      tree = &*fresh;
    }

    Walker walker(*tree, walk_seed);
    const auto status = walker.advance({config_.level_cut, config_.horizon, true});
    bool accepted = false;
    if (status == WalkStatus::exited_root) {
      ++telemetry_.exited_before_cut;
    } else if (status == WalkStatus::budget_exhausted) {
      ++telemetry_.horizon_before_cut;
    } else {
      if (continuation) continuation(walker);
      if (walker.trajectory().exited_root) {
        ++telemetry_.exited_after_cut;
      } else {
        accepted = true;
      }
    }
    if (accepted) {
      ++telemetry_.accepted;
      return {walker.take(), tree_seed, walk_seed, attempt};
    }
    if (telemetry_.attempts >= config_.starvation_attempts &&
        telemetry_.acceptance_rate() < config_.starvation_rate) {
      throw AcceptanceStarved("acceptance rate " + std::to_string(telemetry_.acceptance_rate()) + " after " +
                              std::to_string(telemetry_.attempts) + " attempts");
    }
  }
}

ConditionedDraw sample_conditioned_never_return(ConditionedSampler& sampler, const Continuation& continuation) {
  return sampler.next(continuation);
}

CoupledPaths coupled_run_with_biased_walk(LazyTree& tree, std::uint64_t walk_seed, std::uint64_t steps) {
  const double i = tree.model().env.ess_inf();
  const double nu_min = tree.model().offspring.nu_min();
  if (!(i * nu_min > 1.0)) {
    throw PreconditionViolation("coupling requires ess inf A * nu_min > 1");
  }
  const double p = i * nu_min / (1.0 + i * nu_min);
  // Same seeding as Walker, so the tree path equals run(tree, walk_seed, ...).
  WalkRng rng(walk_seed);
  Walker walker(tree, walk_seed);
  std::vector<std::int64_t> y{0};
  y.reserve(steps + 1);
  for (std::uint64_t k = 0; k < steps; ++k) {
    const double u = rng.uniform();
    walker.step_with(u);
    y.push_back(y.back() + (u <= p ? 1 : -1));
  }
  return {walker.take(), std::move(y), p};
}

}  // namespace rwre
