#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rwre/errors.hpp"
#include "rwre/experiments.hpp"

using namespace rwre;

namespace {

ExperimentConfig small(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.model = parse_model("offspring = 1:0.2 2:0.5 3:0.3\nenv = 0.5:0.5 2:0.5\n");
  c.draws = 24;
  c.level_cut = 8;
  c.margin = 5;
  c.target_level = 60;
  c.horizon = 200000;
  c.tree_samples = 30;
  c.h_grid = {0.5, 1.0, 2.0};
  c.b_grid = {1.0, 2.0};
  c.k_grid = {2, 3};
  c.n_grid = {3, 4};
  return c;
}

const Artifact& find(const ExperimentResult& r, const std::string& name) {
  for (const auto& a : r.artifacts) {
    if (a.name == name) return a;
  }
  FAIL("missing artifact " << name);
  throw;
}

}  // namespace

TEST_CASE("experiment kinds round-trip") {
  for (auto k : {ExperimentKind::criteria, ExperimentKind::simulate, ExperimentKind::regen, ExperimentKind::tails,
                 ExperimentKind::rates}) {
    CHECK(parse_experiment_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_experiment_kind("bogus"), InvalidConfig);
}

TEST_CASE("validation") {
  auto c = small(ExperimentKind::regen);
  CHECK_NOTHROW(validate(c));
  auto bad = c;
  bad.replicas = 0;
  CHECK_THROWS_AS(validate(bad), InvalidConfig);
  bad = c;
  bad.draws = 0;
  CHECK_THROWS_AS(validate(bad), InvalidConfig);
  bad = c;
  bad.h_grid = {1.0, 0.5};
  CHECK_THROWS_AS(validate(bad), InvalidConfig);
  bad = c;
  bad.k_grid = {};
  CHECK_THROWS_AS(validate(bad), InvalidConfig);
  bad = c;
  bad.b_grid = {0.5};
  CHECK_THROWS_AS(validate(bad), InvalidConfig);
  bad = c;
  bad.model.reset();
  bad.model_path = "/nonexistent/model.txt";
  CHECK_THROWS_AS(compute_experiment(bad), InvalidConfig);
}

TEST_CASE("experiments are deterministic and independent of the replica count") {
  for (auto kind : {ExperimentKind::criteria, ExperimentKind::simulate, ExperimentKind::regen, ExperimentKind::tails,
                    ExperimentKind::rates}) {
    CAPTURE(to_string(kind));
    auto c = small(kind);
    const auto a = compute_experiment(c);
    const auto b = compute_experiment(c);
    c.replicas = 3;
    const auto r3 = compute_experiment(c);
    REQUIRE(!a.artifacts.empty());
    CHECK(manifest(a.artifacts) == manifest(b.artifacts));
    CHECK(manifest(a.artifacts) == manifest(r3.artifacts));
    for (std::size_t i = 0; i < a.artifacts.size(); ++i) CHECK(a.artifacts[i].content == r3.artifacts[i].content);
    c.replicas = 1;
    c.seed = 99;
    c.walk_seed = 98;
    const auto other = compute_experiment(c);
    CHECK(manifest(other.artifacts) != manifest(a.artifacts));
  }
}

TEST_CASE("artifact contents") {
  const auto crit = compute_experiment(small(ExperimentKind::criteria));
  const auto j = nlohmann::json::parse(find(crit, "criteria.json").content);
  CHECK(j.contains("transient"));
  CHECK(j["transient"].get<bool>());

  const auto regen = compute_experiment(small(ExperimentKind::regen));
  const auto speed = nlohmann::json::parse(find(regen, "speed.json").content);
  CHECK(speed.contains("v_hat"));
  CHECK(find(regen, "regen_records.csv").content.find('\n') != std::string::npos);

  const auto meta = nlohmann::json::parse(regen.metadata);
  CHECK(meta.contains("replicas"));
  CHECK(manifest(regen.artifacts).find("metadata.json") == std::string::npos);
}

TEST_CASE("run_experiment writes artifacts and manifest") {
  auto c = small(ExperimentKind::simulate);
  c.out_dir = std::filesystem::temp_directory_path() / "rwre_experiments_test";
  std::filesystem::remove_all(c.out_dir);
  const auto r = run_experiment(c);
  for (const auto& a : r.artifacts) {
    std::ifstream in(c.out_dir / a.name, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == a.content);
  }
  std::ifstream man(c.out_dir / "manifest.csv");
  std::stringstream ms;
  ms << man.rdbuf();
  CHECK(ms.str() == manifest(r.artifacts));
  CHECK(std::filesystem::exists(c.out_dir / "metadata.json"));
  std::filesystem::remove_all(c.out_dir);
}
