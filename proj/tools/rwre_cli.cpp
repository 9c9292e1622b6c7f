// Command-line front end: one subcommand per experiment family.
//
//   rwre_cli regen --model m.txt --seed 7 --draws 200 --out results/
//
// Options may also come from a flat `key = value` file given with --config
// (keys are the long option names). Errors are reported on stderr as one
// JSON line: {"error": "<kind>", "message": "..."}.

#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rwre/errors.hpp"
#include "rwre/experiments.hpp"

namespace {

int report_error(std::string_view kind, std::string_view message, int code) {
  nlohmann::json j{{"error", kind}, {"message", message}};
  std::cerr << j.dump() << '\n';
  return code;
}

void add_common(CLI::App& app, rwre::ExperimentConfig& c, std::string& policy) {
  app.add_option("--model", c.model_path, "model file (offspring = k:q ..., env = a:w ...)")->required();
  app.add_option("--seed", c.seed, "master seed for trees");
  app.add_option("--walk-seed", c.walk_seed, "master seed for walks");
  app.add_option("--replicas", c.replicas, "parallel workers; results do not depend on it");
  app.add_option("--horizon", c.horizon, "step budget per walk");
  app.add_option("--level-cut", c.level_cut, "generation a walk must reach to be accepted");
  app.add_option("--margin", c.margin, "regeneration censoring margin, in generations");
  app.add_option("--draws", c.draws, "number of walks or conditioned draws");
  app.add_option("--target-level", c.target_level, "generation each walk continues to");
  app.add_option("--policy", policy, "annealed (fresh tree per draw) or quenched (one tree)")
      ->check(CLI::IsMember({"annealed", "quenched"}));
  app.add_option("--h-grid", c.h_grid, "comma-separated h values")->delimiter(',');
  app.add_option("--b-grid", c.b_grid, "comma-separated b values")->delimiter(',');
  app.add_option("--k-grid", c.k_grid, "comma-separated k values")->delimiter(',');
  app.add_option("--n-grid", c.n_grid, "comma-separated generations")->delimiter(',');
  app.add_option("--tree-samples", c.tree_samples, "trees per exact-computation estimate");
  app.add_option("--out", c.out_dir, "output directory");
  app.set_config("--config", "", "flat key = value file with the same option names");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random walks in random environment on Galton-Watson trees"};
  app.require_subcommand(1);

  rwre::ExperimentConfig config;
  std::string policy = "annealed";
  const std::pair<const char*, const char*> commands[] = {
      {"criteria", "transience, speed and slowdown criteria, psi and rate functions at speed 1"},
      {"simulate", "plain walks from the root: status and hitting times"},
      {"regen", "regeneration records and the speed estimate"},
      {"tails", "first regeneration time survival curve and tail fits"},
      {"rates", "e_k(h,b) grids and the J_a / J_q summaries"},
  };
  add_common(app, config, policy);
  // options may appear before or after the subcommand
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("invalid_config", e.what(), 2);
  }

  try {
    config.kind = rwre::parse_experiment_kind(app.get_subcommands().front()->get_name());
    config.policy = policy == "quenched" ? rwre::EnvPolicy::quenched : rwre::EnvPolicy::annealed;
    const auto result = rwre::run_experiment(config);
    for (const auto& a : result.artifacts) std::cout << (config.out_dir / a.name).string() << '\n';
    return 0;
  } catch (const rwre::Error& e) {
    return report_error(e.kind(), e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
}
