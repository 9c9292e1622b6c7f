#pragma once

// Experiment orchestration shared by the command-line tool: configuration,
// replica fan-out, and the CSV/JSON artifacts each experiment family writes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rwre/model.hpp"
#include "rwre/walker.hpp"

namespace rwre {

enum class ExperimentKind { criteria, simulate, regen, tails, rates };

std::string_view to_string(ExperimentKind kind) noexcept;
ExperimentKind parse_experiment_kind(std::string_view name);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::criteria;
  std::filesystem::path model_path;
  std::optional<ModelSpec> model;  // used instead of model_path when set
  std::uint64_t seed = 1;          // trees
  std::uint64_t walk_seed = 2;     // walks
  unsigned replicas = 1;
  std::uint64_t horizon = 10'000'000;
  std::int32_t level_cut = 50;
  std::int32_t margin = 25;
  std::uint64_t draws = 1000;
  std::int32_t target_level = 1000;
  EnvPolicy policy = EnvPolicy::annealed;
  std::vector<double> h_grid{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0};
  std::vector<double> b_grid{1.0};
  std::vector<std::uint32_t> k_grid{2, 3, 4, 5, 6, 7, 8};
  std::vector<std::uint32_t> n_grid{4, 6, 8};
  std::uint64_t tree_samples = 200;
  std::filesystem::path out_dir = "out";
};

/// Throws InvalidConfig when a count is not positive or a grid is unsorted.
void validate(const ExperimentConfig& config);

struct Artifact {
  std::string name;  // file name inside out_dir
  std::string content;
};

struct ExperimentResult {
  std::vector<Artifact> artifacts;  // deterministic given config and seeds
  std::string metadata;             // JSON with timestamps; excluded from the manifest
};

/// Runs the experiment in memory.
ExperimentResult compute_experiment(const ExperimentConfig& config);

/// Runs the experiment and writes its artifacts, metadata.json and
/// manifest.csv (file, bytes, FNV-1a hash) into config.out_dir.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Manifest text for a set of artifacts.
std::string manifest(const std::vector<Artifact>& artifacts);

}  // namespace rwre
