#include "rwre/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "rwre/errors.hpp"
#include "rwre/format.hpp"
#include "rwre/parallel.hpp"
#include "rwre/quenched_exact.hpp"
#include "rwre/regen.hpp"
#include "rwre/rng.hpp"

namespace rwre {

namespace {

using nlohmann::ordered_json;

// Numbers go through the 12-significant-digit formatter so JSON and CSV
// agree; non-finite values become strings.
ordered_json num(double x) {
  if (!std::isfinite(x)) return format_number(x);
  return std::stod(format_number(x));
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

// Contiguous slice [begin, end) of `total` items owned by replica r.
std::pair<std::uint64_t, std::uint64_t> slice(std::uint64_t total, unsigned replicas, unsigned r) {
  return {total * r / replicas, total * (r + 1) / replicas};
}

SamplerConfig sampler_config(const ExperimentConfig& c) {
  SamplerConfig s;
  s.policy = c.policy;
  s.tree_seed = c.seed;
  s.walk_seed = c.walk_seed;
  s.horizon = c.horizon;
  s.level_cut = c.level_cut;
  return s;
}

ordered_json telemetry_json(const SamplerTelemetry& t) {
  return {{"attempts", t.attempts},
          {"accepted", t.accepted},
          {"exited_before_cut", t.exited_before_cut},
          {"horizon_before_cut", t.horizon_before_cut},
          {"exited_after_cut", t.exited_after_cut},
          {"acceptance_rate", num(t.acceptance_rate())}};
}

ModelSpec resolve_model(const ExperimentConfig& c) { return c.model ? *c.model : load_model(c.model_path); }

std::vector<Artifact> run_criteria(const ExperimentConfig& c, const ModelSpec& model) {
  const auto report = classify(model);
  PsiOptions popts;
  std::string psi_mode = "exact";
  RateAtOne rate{};
  try {
    rate = rate_at_one(model, popts);
  } catch (const BudgetExceeded&) {
    popts.mode = PsiMode::mc;
    popts.seed = c.seed;
    psi_mode = "mc";
    rate = rate_at_one(model, popts);
  }
  const double lambda_q1 = model.offspring.q1() > 0.0 ? lambda_param(model, model.offspring.q1())
                                                      : std::numeric_limits<double>::infinity();

  ordered_json j;
  j["model"] = format_model(model);
  j["mean_offspring"] = num(model.offspring.mean());
  j["q1"] = num(model.offspring.q1());
  j["nu_min"] = model.offspring.nu_min();
  j["ess_inf_a"] = num(model.env.ess_inf());
  j["ess_sup_a"] = num(model.env.ess_sup());
  j["min_moment_t"] = num(report.min_moment.t);
  j["min_moment_value"] = num(report.min_moment.value);
  j["transience_threshold"] = num(report.transience_threshold);
  j["transient"] = report.transient;
  j["lambda"] = num(report.lambda);
  j["lambda_q1"] = num(lambda_q1);
  j["speed_positive"] = report.speed_positive;
  j["slowdown_regime"] = std::string(to_string(report.slowdown_regime));
  j["boundary_flags"] = report.boundary_flags;
  j["psi_mode"] = psi_mode;
  j["ia1"] = num(rate.ia1);
  j["iq1"] = num(rate.iq1);
  j["theta_star"] = num(rate.theta_star);
  j["psi1"] = num(rate.psi1);
  j["dpsi1"] = num(rate.dpsi1);
  j["coincide"] = rate.coincide;
  j["coincide_boundary"] = rate.boundary;

  CsvTable cascade({"n", "tree_samples", "median", "lower_quartile", "upper_quartile", "target", "psi1"});
  EnOptions eopts;
  eopts.seed = c.seed;
  eopts.threads = c.replicas;
  for (const auto n : c.n_grid) {
    const auto g = cascade_growth(model, n, c.tree_samples, eopts);
    cascade.row(n, c.tree_samples, g.median, g.lower_quartile, g.upper_quartile, g.target, g.psi1);
  }

  const PsiEvaluator eval(model, popts);
  CsvTable psi_curve({"theta", "psi", "psi_over_theta", "std_error"});
  for (int i = 1; i <= 40; ++i) {
    const double theta = i / 20.0;
    const auto p = eval.psi(theta);
    psi_curve.row(theta, p.value, p.value / theta, p.std_error);
  }

  CsvTable table({"quantity", "value"});
  for (const auto& [key, value] : j.items()) {
    if (value.is_string()) {
      auto s = value.get<std::string>();
      std::replace(s.begin(), s.end(), '\n', ';');
      table.row(key, s);
    } else if (value.is_boolean()) {
      table.row(key, value.get<bool>());
    } else if (value.is_number()) {
      table.row(key, value.get<double>());
    } else {
      std::string joined;
      for (const auto& f : value) joined += (joined.empty() ? "" : ";") + f.get<std::string>();
      table.row(key, joined);
    }
  }
  return {{"criteria.json", dump(j)},
          {"criteria.csv", table.text()},
          {"cascade.csv", cascade.text()},
          {"psi_curve.csv", psi_curve.text()}};
}

std::vector<Artifact> run_simulate(const ExperimentConfig& c, const ModelSpec& model) {
  struct Summary {
    WalkStatus status;
    std::uint64_t steps;
    std::int32_t level;
    std::vector<std::uint64_t> tau;
    std::optional<std::uint64_t> exited_root;
  };
  std::vector<std::vector<Summary>> parts(c.replicas);
  parallel_for(c.replicas, c.replicas, [&](std::size_t r) {
    const auto [begin, end] = slice(c.draws, c.replicas, static_cast<unsigned>(r));
    for (std::uint64_t i = begin; i < end; ++i) {
      LazyTree tree(model, derive_seed(c.seed, i));
      const auto t = run(tree, derive_seed(c.walk_seed, i), {c.target_level, c.horizon, false});
      parts[r].push_back({t.status, t.steps(), t.level(), t.tau, t.exited_root});
    }
  });
  CsvTable walks({"draw", "status", "steps", "final_level", "max_level", "exited_root"});
  CsvTable hits({"draw", "n", "tau_n"});
  std::uint64_t draw = 0;
  std::uint64_t reached = 0;
  std::uint64_t exited = 0;
  for (const auto& part : parts) {
    for (const auto& t : part) {
      const auto max_level = static_cast<std::int32_t>(t.tau.size()) - 1;
      walks.row(draw, std::string(to_string(t.status)), t.steps, t.level, max_level,
                t.exited_root ? format_number(*t.exited_root) : std::string());
      for (const auto n : c.n_grid) {
        if (static_cast<std::int32_t>(n) <= max_level) hits.row(draw, n, t.tau[n]);
      }
      reached += t.status == WalkStatus::reached_level;
      exited += t.exited_root.has_value();
      ++draw;
    }
  }
  ordered_json j{{"draws", c.draws},
                 {"target_level", c.target_level},
                 {"reached_target", reached},
                 {"exited_root", exited},
                 {"fraction_reached", num(static_cast<double>(reached) / static_cast<double>(c.draws))}};
  return {{"walks.csv", walks.text()}, {"hitting_times.csv", hits.text()}, {"simulate.json", dump(j)}};
}

std::vector<Artifact> run_regen(const ExperimentConfig& c, const ModelSpec& model) {
  RegenRunConfig rc;
  rc.sampler = sampler_config(c);
  rc.margin = c.margin;
  rc.target_level = c.target_level;
  std::vector<RegenBatch> parts(c.replicas);
  parallel_for(c.replicas, c.replicas, [&](std::size_t r) {
    const auto [begin, end] = slice(c.draws, c.replicas, static_cast<unsigned>(r));
    if (end > begin) parts[r] = collect_regenerations(model, rc, begin, end - begin);
  });
  std::vector<RegenRecord> records;
  SamplerTelemetry tel;
  for (const auto& p : parts) {
    records.insert(records.end(), p.records.begin(), p.records.end());
    tel += p.telemetry;
  }
  CsvTable rec({"index", "initial", "time_increment", "level_increment", "time", "level"});
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    rec.row(static_cast<std::uint64_t>(i), r.initial, r.time_increment, r.level_increment, r.time, r.level);
  }
  ordered_json j;
  j["draws"] = c.draws;
  j["margin"] = c.margin;
  j["target_level"] = c.target_level;
  j["telemetry"] = telemetry_json(tel);
  SpeedOptions so;
  so.min_records = 2;
  const auto est = speed_estimate(records, so);
  j["v_hat"] = num(est.v_hat);
  j["std_error"] = num(est.std_error);
  j["ci_low"] = num(est.ci_low);
  j["ci_high"] = num(est.ci_high);
  j["records"] = est.records;
  CsvTable speed({"v_hat", "std_error", "ci_low", "ci_high", "records"});
  speed.row(est.v_hat, est.std_error, est.ci_low, est.ci_high, static_cast<std::uint64_t>(est.records));
  return {{"regen_records.csv", rec.text()}, {"speed.csv", speed.text()}, {"speed.json", dump(j)}};
}

ordered_json fit_json(const TailFit& f) {
  return {{"regime", std::string(to_string(f.regime))},
          {"exponent", num(f.exponent)},
          {"intercept", num(f.intercept)},
          {"std_error", num(f.std_error)},
          {"residual", num(f.residual)},
          {"valid", f.valid},
          {"n_min", f.n_min},
          {"n_max", f.n_max},
          {"points", f.points}};
}

std::vector<Artifact> run_tails(const ExperimentConfig& c, const ModelSpec& model) {
  Gamma1Config gc;
  gc.sampler = sampler_config(c);
  gc.margin = c.margin;
  std::vector<Gamma1Batch> parts(c.replicas);
  parallel_for(c.replicas, c.replicas, [&](std::size_t r) {
    const auto [begin, end] = slice(c.draws, c.replicas, static_cast<unsigned>(r));
    if (end > begin) parts[r] = sample_gamma1(model, gc, begin, end - begin);
  });
  std::vector<Gamma1Sample> samples;
  SamplerTelemetry tel;
  for (const auto& p : parts) {
    samples.insert(samples.end(), p.samples.begin(), p.samples.end());
    tel += p.telemetry;
  }
  CsvTable raw({"draw", "gamma1", "censored"});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    raw.row(static_cast<std::uint64_t>(i), samples[i].value, samples[i].censored);
  }
  const auto curve = survival_curve(samples);
  CsvTable surv({"n", "survivors", "at_risk", "p_hat", "std_error"});
  for (const auto& p : curve.points) surv.row(p.n, p.survivors, p.total, p.p_hat, p.std_error);

  const auto report = classify(model);
  ordered_json j;
  j["draws"] = c.draws;
  j["censored"] = curve.censored;
  j["telemetry"] = telemetry_json(tel);
  j["slowdown_regime"] = std::string(to_string(report.slowdown_regime));
  j["lambda"] = num(report.lambda);
  try {
    const auto rep = fit_tail(curve);
    j["polynomial"] = fit_json(rep.polynomial);
    j["stretched"] = fit_json(rep.stretched);
    j["preferred"] = std::string(to_string(rep.preferred));
    const auto ex = fit_exponential_tail(curve);
    j["exponential"] = {{"slope", num(ex.slope)},       {"intercept", num(ex.intercept)},
                        {"r_squared", num(ex.r_squared)}, {"n_min", ex.n_min},
                        {"n_max", ex.n_max},             {"points", ex.points}};
  } catch (const InsufficientData& e) {
    j["fit_error"] = e.what();
  }
  return {{"gamma1.csv", raw.text()}, {"survival.csv", surv.text()}, {"tail_fit.json", dump(j)}};
}

std::vector<Artifact> run_rates(const ExperimentConfig& c, const ModelSpec& model) {
  EnOptions eopts;
  eopts.seed = c.seed;
  eopts.threads = c.replicas;
  CsvTable grid({"b", "h", "k", "e_k", "std_error", "log_rate", "log_rate_std_error"});
  CsvTable curve({"b", "h", "log_e", "std_error", "best_k"});
  CsvTable summary({"b", "ja", "ja_std_error", "jq", "jq_std_error", "h_c", "h_resolution"});
  for (const double b : c.b_grid) {
    const auto rc = rate_curve(model, b, c.h_grid, c.k_grid, c.tree_samples, eopts);
    for (const auto& p : rc.grid) grid.row(b, p.h, p.k, p.e_k, p.e_k_std_error, p.log_rate, p.log_rate_std_error);
    for (std::size_t i = 0; i < rc.h.size(); ++i) curve.row(b, rc.h[i], rc.log_e[i], rc.log_e_std_error[i], rc.best_k[i]);
    summary.row(b, rc.ja, rc.ja_std_error, rc.jq, rc.jq_std_error, rc.h_c ? format_number(*rc.h_c) : std::string("nan"),
                rc.h_resolution);
  }
  return {{"rate_grid.csv", grid.text()}, {"rate_curve.csv", curve.text()}, {"rate_summary.csv", summary.text()}};
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace

std::string_view to_string(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::criteria: return "criteria";
    case ExperimentKind::simulate: return "simulate";
    case ExperimentKind::regen: return "regen";
    case ExperimentKind::tails: return "tails";
    case ExperimentKind::rates: return "rates";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (auto k : {ExperimentKind::criteria, ExperimentKind::simulate, ExperimentKind::regen, ExperimentKind::tails,
                 ExperimentKind::rates}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidConfig("unknown experiment kind '" + std::string(name) + "'");
}

void validate(const ExperimentConfig& c) {
  if (c.replicas == 0) throw InvalidConfig("replicas must be positive");
  if (c.horizon == 0) throw InvalidConfig("horizon must be positive");
  if (c.level_cut <= 0) throw InvalidConfig("level_cut must be positive");
  if (c.margin <= 0) throw InvalidConfig("margin must be positive");
  if (c.draws == 0) throw InvalidConfig("draws must be positive");
  if (c.target_level <= 0) throw InvalidConfig("target_level must be positive");
  if (c.tree_samples == 0) throw InvalidConfig("tree_samples must be positive");
  auto check = [](const auto& grid, const char* name) {
    if (grid.empty()) throw InvalidConfig(std::string(name) + " must not be empty");
    if (!std::is_sorted(grid.begin(), grid.end())) throw InvalidConfig(std::string(name) + " must be sorted ascending");
  };
  check(c.h_grid, "h grid");
  check(c.b_grid, "b grid");
  check(c.k_grid, "k grid");
  check(c.n_grid, "n grid");
  if (c.b_grid.front() < 1.0) throw InvalidConfig("b grid values must be >= 1");
  if (c.k_grid.front() == 0 || c.n_grid.front() == 0) throw InvalidConfig("k and n grid values must be positive");
}

std::string manifest(const std::vector<Artifact>& artifacts) {
  CsvTable t({"file", "bytes", "fnv1a64"});
  for (const auto& a : artifacts) t.row(a.name, static_cast<std::uint64_t>(a.content.size()), hex64(content_hash(a.content)));
  return t.text();
}

ExperimentResult compute_experiment(const ExperimentConfig& config) {
  validate(config);
  const auto model = resolve_model(config);
  const auto started = utc_timestamp();
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult result;
  switch (config.kind) {
    case ExperimentKind::criteria: result.artifacts = run_criteria(config, model); break;
    case ExperimentKind::simulate: result.artifacts = run_simulate(config, model); break;
    case ExperimentKind::regen: result.artifacts = run_regen(config, model); break;
    case ExperimentKind::tails: result.artifacts = run_tails(config, model); break;
    case ExperimentKind::rates: result.artifacts = run_rates(config, model); break;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ordered_json meta{{"experiment", std::string(to_string(config.kind))},
                    {"model_path", config.model_path.string()},
                    {"seed", config.seed},
                    {"walk_seed", config.walk_seed},
                    {"replicas", config.replicas},
                    {"started_utc", started},
                    {"finished_utc", utc_timestamp()},
                    {"wall_seconds", num(seconds)}};
  result.metadata = dump(meta);
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  auto result = compute_experiment(config);
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) throw InvalidConfig("cannot create output directory " + config.out_dir.string() + ": " + ec.message());
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream out(config.out_dir / name, std::ios::binary);
    if (!out) throw InvalidConfig("cannot write " + (config.out_dir / name).string());
    out << content;
  };
  for (const auto& a : result.artifacts) write(a.name, a.content);
  write("manifest.csv", manifest(result.artifacts));
  write("metadata.json", result.metadata);
  return result;
}

}  // namespace rwre
