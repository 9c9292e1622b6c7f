#include "rwre/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "rwre/errors.hpp"
#include "rwre/format.hpp"
#include "rwre/rng.hpp"

namespace rwre {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_normalized(double total, const char* what) {
  if (std::abs(total - 1.0) > kNormalizationTolerance) {
    std::ostringstream os;
    os << what << " weights sum to " << format_number(total) << ", expected 1";
    throw InvalidModel(os.str());
  }
}

template <class Atom, class Weight>
std::vector<double> build_cdf(const std::vector<Atom>& atoms, Weight weight) {
  std::vector<double> cdf(atoms.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    acc += weight(atoms[i]);
    cdf[i] = acc;
  }
  return cdf;
}

std::size_t pick(const std::vector<double>& cdf, double u) noexcept {
  // Scale by the total so a cdf that ends at 1 - 1e-16 still covers u.
  const double target = u * cdf.back();
  for (std::size_t i = 0; i + 1 < cdf.size(); ++i) {
    if (target < cdf[i]) return i;
  }
  return cdf.size() - 1;
}

// log E[A^t], stable for large |t|.
double log_moment(const EnvLaw& env, double t) {
  double top = -kInf;
  for (const auto& at : env.atoms()) top = std::max(top, t * std::log(at.a));
  double acc = 0.0;
  for (const auto& at : env.atoms()) acc += at.w * std::exp(t * std::log(at.a) - top);
  return top + std::log(acc);
}

// d/dt log E[A^t].
double log_moment_slope(const EnvLaw& env, double t) {
  double top = -kInf;
  for (const auto& at : env.atoms()) top = std::max(top, t * std::log(at.a));
  double num = 0.0;
  double den = 0.0;
  for (const auto& at : env.atoms()) {
    const double la = std::log(at.a);
    const double e = at.w * std::exp(t * la - top);
    num += e * la;
    den += e;
  }
  return num / den;
}

double parse_double(std::string_view s, std::string_view context) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw InvalidConfig("cannot parse number '" + std::string(s) + "' in " + std::string(context));
  }
  return v;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::pair<double, double>> parse_pairs(std::string_view value, std::string_view key) {
  std::vector<std::pair<double, double>> out;
  std::size_t pos = 0;
  while (pos < value.size()) {
    const auto next = value.find_first_of(" \t,", pos);
    const auto token = trim(value.substr(pos, next == std::string_view::npos ? next : next - pos));
    pos = next == std::string_view::npos ? value.size() : next + 1;
    if (token.empty()) continue;
    const auto colon = token.find(':');
    if (colon == std::string_view::npos) {
      throw InvalidConfig("atom '" + std::string(token) + "' in '" + std::string(key) +
                          "' is not of the form value:weight");
    }
    out.emplace_back(parse_double(token.substr(0, colon), key),
                     parse_double(token.substr(colon + 1), key));
  }
  if (out.empty()) throw InvalidConfig("key '" + std::string(key) + "' has no atoms");
  return out;
}

}  // namespace

OffspringLaw::OffspringLaw(std::vector<OffspringAtom> atoms) {
  std::map<std::uint32_t, double> merged;
  double total = 0.0;
  for (const auto& at : atoms) {
    if (!(at.q >= 0.0) || !std::isfinite(at.q)) throw InvalidModel("offspring probability must be >= 0");
    total += at.q;
    if (at.q == 0.0) continue;
    if (at.k == 0) throw InvalidModel("offspring law must have q_0 = 0");
    merged[at.k] += at.q;
  }
  check_normalized(total, "offspring");
  if (merged.empty()) throw InvalidModel("offspring law has no positive atom");
  for (const auto& [k, q] : merged) atoms_.push_back({k, q});
  for (const auto& at : atoms_) mean_ += at.k * at.q;
  if (!(mean_ > 1.0)) throw InvalidModel("offspring mean must exceed 1 (supercritical)");
  cdf_ = build_cdf(atoms_, [](const OffspringAtom& a) { return a.q; });
}

double OffspringLaw::q(std::uint32_t k) const noexcept {
  for (const auto& at : atoms_) {
    if (at.k == k) return at.q;
  }
  return 0.0;
}

std::uint32_t OffspringLaw::sample(double u) const noexcept { return atoms_[pick(cdf_, u)].k; }

EnvLaw::EnvLaw(std::vector<EnvAtom> atoms) {
  std::map<double, double> merged;
  double total = 0.0;
  for (const auto& at : atoms) {
    if (!(at.a > 0.0) || !std::isfinite(at.a)) throw InvalidModel("A atoms must be positive and finite");
    if (!(at.w >= 0.0) || !std::isfinite(at.w)) throw InvalidModel("A weights must be >= 0");
    total += at.w;
    if (at.w > 0.0) merged[at.a] += at.w;
  }
  check_normalized(total, "env");
  if (merged.empty()) throw InvalidModel("env law has no positive atom");
  for (const auto& [a, w] : merged) atoms_.push_back({a, w});
  cdf_ = build_cdf(atoms_, [](const EnvAtom& a) { return a.w; });
}

double EnvLaw::sample(double u) const noexcept { return atoms_[pick(cdf_, u)].a; }

ModelSpec parse_model(std::string_view text) {
  std::vector<OffspringAtom> offspring;
  std::vector<EnvAtom> env;
  bool have_offspring = false;
  bool have_env = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidConfig("line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "offspring") {
      for (auto [k, q] : parse_pairs(value, key)) {
        if (k < 0 || k != std::floor(k) || k > 1e6) {
          throw InvalidConfig("offspring count must be a non-negative integer");
        }
        offspring.push_back({static_cast<std::uint32_t>(k), q});
      }
      have_offspring = true;
    } else if (key == "env") {
      for (auto [a, w] : parse_pairs(value, key)) env.push_back({a, w});
      have_env = true;
    } else {
      throw InvalidConfig("line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
  }
  if (!have_offspring) throw InvalidConfig("missing key 'offspring'");
  if (!have_env) throw InvalidConfig("missing key 'env'");
  return ModelSpec{OffspringLaw(std::move(offspring)), EnvLaw(std::move(env))};
}

ModelSpec load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidConfig("cannot open model file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

std::string format_model(const ModelSpec& model) {
  std::string out = "offspring =";
  for (const auto& at : model.offspring.atoms()) {
    out += ' ' + std::to_string(at.k) + ':' + format_number(at.q);
  }
  out += "\nenv =";
  for (const auto& at : model.env.atoms()) {
    out += ' ' + format_number(at.a) + ':' + format_number(at.w);
  }
  out += '\n';
  return out;
}

ModelSpec constant_model(std::uint32_t b, double lambda) {
  return ModelSpec{OffspringLaw({{b, 1.0}}), EnvLaw({{lambda, 1.0}})};
}

double moment(const ModelSpec& model, double t) {
  double acc = 0.0;
  for (const auto& at : model.env.atoms()) acc += at.w * std::pow(at.a, t);
  return acc;
}

MomentMinimum min_moment_unit_interval(const ModelSpec& model) {
  // E[A^t] is log-convex, hence convex: golden-section search is exact up to tolerance.
  constexpr double kTol = 1e-10;
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0;
  double hi = 1.0;
  double x1 = hi - invphi * (hi - lo);
  double x2 = lo + invphi * (hi - lo);
  double f1 = moment(model, x1);
  double f2 = moment(model, x2);
  while (hi - lo > kTol) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - invphi * (hi - lo);
      f1 = moment(model, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + invphi * (hi - lo);
      f2 = moment(model, x2);
    }
  }
  MomentMinimum best{0.5 * (lo + hi), moment(model, 0.5 * (lo + hi))};
  for (double t : {0.0, 1.0}) {
    const double v = moment(model, t);
    if (v < best.value) best = {t, v};
  }
  return best;
}

double lambda_param(const ModelSpec& model, double r) {
  if (!(r > 0.0) || r > 1.0) throw PreconditionViolation("lambda_param needs r in (0,1]");
  const EnvLaw& env = model.env;
  // Monotone transform: one side of the sublevel set is a half-line.
  if (env.ess_inf() >= 1.0 || env.ess_sup() <= 1.0) return kInf;

  constexpr double kCap = 1e6;
  constexpr double kTol = 1e-10;
  const double level = -std::log(r);  // log(1/r)
  auto above = [&](double t) { return log_moment(env, t) > level; };

  // Minimizer of the convex log-moment: root of its increasing slope.
  double lo = -1.0;
  double hi = 1.0;
  while (log_moment_slope(env, lo) > 0.0) lo *= 2.0;
  while (log_moment_slope(env, hi) < 0.0) hi *= 2.0;
  while (hi - lo > kTol * std::max(1.0, std::abs(lo))) {
    const double mid = 0.5 * (lo + hi);
    (log_moment_slope(env, mid) < 0.0 ? lo : hi) = mid;
  }
  const double tmin = 0.5 * (lo + hi);
  if (above(tmin)) return 0.0;

  auto edge = [&](double direction) {
    double step = 1.0;
    double inside = tmin;
    double outside = tmin + direction * step;
    while (!above(outside)) {
      if (std::abs(outside) > kCap) return direction * kInf;
      inside = outside;
      step *= 2.0;
      outside = tmin + direction * step;
    }
    while (std::abs(outside - inside) > kTol) {
      const double mid = 0.5 * (inside + outside);
      (above(mid) ? outside : inside) = mid;
    }
    return 0.5 * (inside + outside);
  };
  const double right = edge(+1.0);
  const double left = edge(-1.0);
  if (std::isinf(right) || std::isinf(left)) return kInf;
  return right - left;
}

double lambda_param(const ModelSpec& model) {
  const double q1 = model.offspring.q1();
  if (q1 == 0.0) return kInf;
  return lambda_param(model, q1);
}

PsiEvaluator::PsiEvaluator(const ModelSpec& model, const PsiOptions& options) : mode_(options.mode) {
  const auto& env = model.env.atoms();
  const std::size_t natoms = env.size();
  offsets_.push_back(0);

  if (mode_ == PsiMode::exact) {
    // Enumerate multisets of A-values per nu with multinomial weights;
    // sum_i omega_i^theta only depends on the multiset.
    std::uint64_t total = 0;
    for (const auto& at : model.offspring.atoms()) {
      // C(k + natoms - 1, natoms - 1)
      double c = 1.0;
      for (std::size_t j = 1; j < natoms; ++j) c = c * static_cast<double>(at.k + j) / static_cast<double>(j);
      total += static_cast<std::uint64_t>(std::min(c, 1e18));
      if (total > options.enumeration_budget) {
        throw BudgetExceeded("exact psi enumeration exceeds budget of " +
                             std::to_string(options.enumeration_budget) + " configurations; use mc mode");
      }
    }
    std::vector<std::uint32_t> counts(natoms, 0);
    for (const auto& at : model.offspring.atoms()) {
      const std::uint32_t k = at.k;
      const double log_kfact = std::lgamma(k + 1.0);
      // Recursive composition enumeration over atoms.
      auto recurse = [&](auto&& self, std::size_t j, std::uint32_t remaining) -> void {
        if (j + 1 == natoms) {
          counts[j] = remaining;
          double logp = std::log(at.q) + log_kfact;
          double sum_a = 0.0;
          for (std::size_t l = 0; l < natoms; ++l) {
            logp += counts[l] * std::log(env[l].w) - std::lgamma(counts[l] + 1.0);
            sum_a += counts[l] * env[l].a;
          }
          weights_.push_back(std::exp(logp));
          for (std::size_t l = 0; l < natoms; ++l) {
            if (counts[l] > 0) terms_.push_back({static_cast<double>(counts[l]), env[l].a / (1.0 + sum_a)});
          }
          offsets_.push_back(terms_.size());
          return;
        }
        for (std::uint32_t c = 0; c <= remaining; ++c) {
          counts[j] = c;
          self(self, j + 1, remaining - c);
        }
      };
      recurse(recurse, 0, k);
    }
  } else {
    if (options.samples < 2) throw PreconditionViolation("psi mc mode needs at least 2 samples");
    CounterStream stream(derive_seed(options.seed, 0x7073u));
    std::vector<double> a;
    const double w = 1.0 / static_cast<double>(options.samples);
    for (std::uint64_t s = 0; s < options.samples; ++s) {
      const std::uint32_t nu = model.offspring.sample(stream.uniform());
      a.resize(nu);
      double sum_a = 0.0;
      for (auto& v : a) {
        v = model.env.sample(stream.uniform());
        sum_a += v;
      }
      weights_.push_back(w);
      for (double v : a) terms_.push_back({1.0, v / (1.0 + sum_a)});
      offsets_.push_back(terms_.size());
    }
  }
}

double PsiEvaluator::sum_powers(std::size_t i, double theta) const {
  double s = 0.0;
  for (std::size_t j = offsets_[i]; j < offsets_[i + 1]; ++j) s += terms_[j].count * std::pow(terms_[j].omega, theta);
  return s;
}

PsiValue PsiEvaluator::psi(double theta) const {
  double mean = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) mean += weights_[i] * sum_powers(i, theta);
  if (mode_ == PsiMode::exact) return {std::log(mean), 0.0};
  double ss = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const double d = sum_powers(i, theta) - mean;
    ss += d * d;
  }
  const double n = static_cast<double>(weights_.size());
  const double se_mean = std::sqrt(ss / (n - 1.0) / n);
  return {std::log(mean), se_mean / mean};
}

double PsiEvaluator::derivative(double theta) const {
  if (mode_ == PsiMode::mc) {
    constexpr double h = 1e-5;
    return (psi(theta + h).value - psi(theta - h).value) / (2.0 * h);
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    for (std::size_t j = offsets_[i]; j < offsets_[i + 1]; ++j) {
      const double p = std::pow(terms_[j].omega, theta);
      num += weights_[i] * terms_[j].count * p * std::log(terms_[j].omega);
      den += weights_[i] * terms_[j].count * p;
    }
  }
  return num / den;
}

PsiValue psi(const ModelSpec& model, double theta, const PsiOptions& options) {
  return PsiEvaluator(model, options).psi(theta);
}

RateAtOne rate_at_one(const ModelSpec& model, const PsiOptions& options) {
  const PsiEvaluator eval(model, options);
  auto ratio = [&](double th) { return eval.psi(th).value / th; };

  // psi(theta)/theta is unimodal on (0,1] (theta psi' - psi is nondecreasing),
  // so a grid scan followed by golden-section refinement finds the infimum.
  constexpr int kGrid = 1000;
  int best = kGrid;
  double best_val = ratio(1.0);
  for (int i = 1; i < kGrid; ++i) {
    const double v = ratio(static_cast<double>(i) / kGrid);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  double theta_star = static_cast<double>(best) / kGrid;
  if (best < kGrid) {
    double lo = static_cast<double>(best - 1) / kGrid;
    double hi = static_cast<double>(best + 1) / kGrid;
    lo = std::max(lo, 1e-12);
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    while (hi - lo > 1e-12) {
      const double x1 = hi - invphi * (hi - lo);
      const double x2 = lo + invphi * (hi - lo);
      if (ratio(x1) <= ratio(x2)) {
        hi = x2;
      } else {
        lo = x1;
      }
    }
    const double refined = 0.5 * (lo + hi);
    if (ratio(refined) < best_val) {
      best_val = ratio(refined);
      theta_star = refined;
    }
  }

  RateAtOne out{};
  out.psi1 = eval.psi(1.0).value;
  out.dpsi1 = eval.derivative(1.0);
  out.ia1 = -out.psi1;
  out.iq1 = -std::min(best_val, out.psi1);
  out.theta_star = best_val < out.psi1 ? theta_star : 1.0;
  out.coincide = out.dpsi1 <= out.psi1;
  out.boundary = std::abs(out.dpsi1 - out.psi1) < kBoundaryTolerance;
  return out;
}

std::string_view to_string(SlowdownRegime regime) noexcept {
  switch (regime) {
    case SlowdownRegime::exponential: return "exponential";
    case SlowdownRegime::stretched_exponential: return "stretched_exponential";
    case SlowdownRegime::polynomial: return "polynomial";
    case SlowdownRegime::degenerate_zero_rate: return "degenerate_zero_rate";
  }
  return "unknown";
}

RegimeReport classify(const ModelSpec& model) {
  RegimeReport rep;
  rep.min_moment = min_moment_unit_interval(model);
  rep.transience_threshold = 1.0 / model.offspring.mean();
  rep.transient = rep.min_moment.value > rep.transience_threshold;
  if (std::abs(rep.min_moment.value - rep.transience_threshold) < kBoundaryTolerance) {
    rep.boundary_flags.emplace_back("transience");
  }

  rep.lambda = lambda_param(model);
  rep.speed_positive = rep.transient && rep.lambda > 1.0;
  if (std::isfinite(rep.lambda) && std::abs(rep.lambda - 1.0) < kBoundaryTolerance) {
    rep.boundary_flags.emplace_back("speed_positivity");
  }

  const double i = model.env.ess_inf();
  const double s = model.env.ess_sup();
  const double critical = 1.0 / model.offspring.nu_min();
  const double q1 = model.offspring.q1();
  if (std::abs(i - critical) < kBoundaryTolerance) {
    rep.slowdown_regime = SlowdownRegime::degenerate_zero_rate;
    rep.boundary_flags.emplace_back("critical_ess_inf");
  } else if (i > critical) {
    rep.slowdown_regime = SlowdownRegime::exponential;
  } else if (q1 > 0.0 && std::abs(s - 1.0) < kBoundaryTolerance) {
    rep.slowdown_regime = SlowdownRegime::degenerate_zero_rate;
    rep.boundary_flags.emplace_back("ess_sup_one");
  } else if (q1 > 0.0 && s > 1.0) {
    rep.slowdown_regime = SlowdownRegime::polynomial;
  } else {
    rep.slowdown_regime = SlowdownRegime::stretched_exponential;
  }
  return rep;
}

}  // namespace rwre
