#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "sysid/bounds.hpp"
#include "sysid/excitation.hpp"
#include "sysid/system.hpp"

namespace sysid {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class CertificateChoice { kClosedForm, kMoments, kGiven };

struct ExcitationSettings {
  CertificateChoice source = CertificateChoice::kClosedForm;
  std::optional<Region> region;  // closed form picks its own when unset
  MomentCertificate moments;     // kMoments
  double c_pe = 0.0, p_pe = 0.0;  // kGiven
  ExcitationGrid grid;
  std::int64_t samples = 100000;
  double slack = 0.05;
};

struct RunSettings {
  Index T = 1000;
  std::int64_t paths = 100;
  double delta = 0.4;
  std::uint64_t seed = 1;
  Vec x0;
  std::string out;  // empty: use the environment default
  unsigned workers = 0;  // 0: hardware concurrency
  Index bound_rows = 0;  // rows in bounds.csv; 0: T
};

struct BmsbSettings {
  BmsbProbeOptions probe;
};

struct ExperimentConfig {
  std::string family = "pwa";
  std::string source_path;

  // pwa
  std::vector<double> thresholds{3500.0};
  double ubar = 1.0;
  // double integrator
  double ubar1 = 0.5, ubar2 = 1.0;
  InnerPolicy inner = InnerPolicy::kSaturatedFeedback;
  double projection_radius = 10.0;
  // generic
  GenericOptions generic;

  std::optional<Mat> theta_star;
  double sigma_w = std::sqrt(0.1);
  double gamma = 1e-4;
  std::optional<Mat> vartheta0;

  ExcitationSettings excitation;
  RunSettings run;
  BoundOptions bounds;
  BmsbSettings bmsb;

  // Builds the system for one PWA threshold (ignored by other families).
  SystemSpec make_system(double threshold) const;
  SystemSpec make_system() const { return make_system(thresholds.front()); }
  ExcitationCertificate make_certificate(const SystemSpec& spec, double threshold) const;
  ExcitationCertificate make_certificate(const SystemSpec& spec) const {
    return make_certificate(spec, thresholds.front());
  }
  void validate() const;
};

namespace config_detail {

inline double parse_real(const YAML::Node& n, const std::string& what) {
  if (!n || !n.IsScalar()) throw ConfigError(what + ": expected a number");
  const std::string s = n.Scalar();
  if (s == "inf" || s == ".inf" || s == "+inf" || s == "infinity" || s == ".Inf")
    return std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw ConfigError(what + ": not a number: " + s);
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError(what + ": not a number: " + s);
  }
}

inline double real_or(const YAML::Node& parent, const char* key, double fallback, const std::string& ctx) {
  const YAML::Node n = parent[key];
  return n ? parse_real(n, ctx + "." + key) : fallback;
}

inline std::int64_t int_or(const YAML::Node& parent, const char* key, std::int64_t fallback, const std::string& ctx) {
  const YAML::Node n = parent[key];
  if (!n) return fallback;
  const double v = parse_real(n, ctx + "." + key);
  if (!std::isfinite(v) || v != std::floor(v) || std::abs(v) > 9e15)
    throw ConfigError(ctx + "." + key + ": expected an integer");
  return static_cast<std::int64_t>(v);
}

inline std::string str_or(const YAML::Node& parent, const char* key, const std::string& fallback) {
  const YAML::Node n = parent[key];
  if (!n) return fallback;
  if (!n.IsScalar()) throw ConfigError(std::string(key) + ": expected a string");
  return n.Scalar();
}

inline Vec parse_vec(const YAML::Node& n, const std::string& what) {
  if (n.IsScalar()) return Vec::Constant(1, parse_real(n, what));
  if (!n.IsSequence()) throw ConfigError(what + ": expected a list of numbers");
  Vec v(static_cast<Index>(n.size()));
  for (std::size_t i = 0; i < n.size(); ++i) v[static_cast<Index>(i)] = parse_real(n[i], what);
  return v;
}

// Matrix as a list of rows; a flat list is read as a column.
inline Mat parse_mat(const YAML::Node& n, const std::string& what) {
  if (!n.IsSequence() || n.size() == 0) throw ConfigError(what + ": expected a non-empty list");
  if (!n[0].IsSequence()) {
    const Vec v = parse_vec(n, what);
    return Mat(v);
  }
  const auto rows = static_cast<Index>(n.size());
  const auto cols = static_cast<Index>(n[0].size());
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const YAML::Node r = n[static_cast<std::size_t>(i)];
    if (!r.IsSequence() || static_cast<Index>(r.size()) != cols) throw ConfigError(what + ": ragged matrix");
    for (Index j = 0; j < cols; ++j) m(i, j) = parse_real(r[static_cast<std::size_t>(j)], what);
  }
  return m;
}

// {terms: [[a, p], ...], offset: c}
inline GrowthFn parse_growth(const YAML::Node& n, const std::string& what) {
  if (n.IsScalar()) return GrowthFn::constant(parse_real(n, what));
  if (!n.IsMap()) throw ConfigError(what + ": expected {terms: [[a, p], ...], offset: c}");
  std::vector<PowerTerm> terms;
  if (const YAML::Node ts = n["terms"]) {
    if (!ts.IsSequence()) throw ConfigError(what + ".terms: expected a list");
    for (const auto& t : ts) {
      if (!t.IsSequence() || t.size() != 2) throw ConfigError(what + ".terms: each term is [coefficient, exponent]");
      terms.push_back({parse_real(t[0], what), parse_real(t[1], what)});
    }
  }
  try {
    return GrowthFn(std::move(terms), real_or(n, "offset", 0.0, what));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

inline std::vector<PolyTerm> parse_terms(const YAML::Node& n, const std::string& what) {
  std::vector<PolyTerm> out;
  if (!n) return out;
  if (!n.IsSequence()) throw ConfigError(what + ": expected a list of terms");
  for (const auto& t : n) {
    PolyTerm p;
    p.output = static_cast<int>(int_or(t, "output", 0, what));
    p.coeff = real_or(t, "coeff", 0.0, what);
    if (!t["powers"] || !t["powers"].IsSequence()) throw ConfigError(what + ": term needs powers");
    for (const auto& e : t["powers"]) p.powers.push_back(static_cast<int>(parse_real(e, what)));
    p.gate_var = static_cast<int>(int_or(t, "gate_var", -1, what));
    p.gate_threshold = real_or(t, "gate_threshold", 0.0, what);
    out.push_back(std::move(p));
  }
  return out;
}

inline Region parse_region(const YAML::Node& n, const std::string& what) {
  const std::string kind = str_or(n, "kind", "all");
  if (kind == "all") return Region::all();
  if (kind == "half_line") return Region::half_line(parse_real(n["upper"], what + ".upper"));
  if (kind == "ball") {
    const double r = parse_real(n["radius"], what + ".radius");
    if (!(r >= 0.0)) throw ConfigError(what + ".radius must be >= 0");
    return Region::ball(parse_vec(n["center"], what + ".center"), r);
  }
  throw ConfigError(what + ".kind: unknown region '" + kind + "' (all, half_line, ball)");
}

}  // namespace config_detail

inline ExperimentConfig parse_config(const YAML::Node& root, const std::string& source = "<string>") {
  using namespace config_detail;
  if (!root.IsMap()) throw ConfigError("config: top level must be a mapping");
  ExperimentConfig c;
  c.source_path = source;

  const YAML::Node sys = root["system"];
  if (!sys) throw ConfigError("config: missing 'system' block");
  c.family = str_or(sys, "family", "pwa");
  if (c.family == "pwa") {
    if (const YAML::Node th = sys["thresholds"]) {
      c.thresholds.clear();
      if (!th.IsSequence() || th.size() == 0) throw ConfigError("system.thresholds: expected a non-empty list");
      for (const auto& v : th) c.thresholds.push_back(parse_real(v, "system.thresholds"));
    } else if (sys["threshold"]) {
      c.thresholds = {parse_real(sys["threshold"], "system.threshold")};
    }
    c.ubar = real_or(sys, "ubar", c.ubar, "system");
  } else if (c.family == "double_integrator") {
    c.ubar1 = real_or(sys, "ubar1", c.ubar1, "system");
    c.ubar2 = real_or(sys, "ubar2", c.ubar2, "system");
    const std::string inner = str_or(sys, "inner", "saturated_feedback");
    if (inner == "saturated_feedback")
      c.inner = InnerPolicy::kSaturatedFeedback;
    else if (inner == "zero")
      c.inner = InnerPolicy::kZero;
    else if (inner == "push_away")
      c.inner = InnerPolicy::kPushAway;
    else
      throw ConfigError("system.inner: unknown policy '" + inner + "' (saturated_feedback, zero, push_away)");
    c.projection_radius = real_or(sys, "projection_radius", c.projection_radius, "system");
  } else if (c.family == "generic") {
    GenericOptions& g = c.generic;
    g.n = static_cast<int>(int_or(sys, "n", 1, "system"));
    g.m = static_cast<int>(int_or(sys, "m", 1, "system"));
    g.d = static_cast<int>(int_or(sys, "d", 1, "system"));
    g.f_terms = parse_terms(sys["f_terms"], "system.f_terms");
    g.psi_terms = parse_terms(sys["psi_terms"], "system.psi_terms");
    if (sys["feedback_gain"]) g.feedback_gain = parse_mat(sys["feedback_gain"], "system.feedback_gain");
    g.feedback_limit = real_or(sys, "feedback_limit", 0.0, "system");
    g.dither = real_or(sys, "dither", 1.0, "system");
    const YAML::Node gr = sys["growth"];
    if (!gr) throw ConfigError("system.growth: required for the generic family");
    g.growth.chi1 = parse_growth(gr["chi1"], "growth.chi1");
    g.growth.chi2 = parse_growth(gr["chi2"], "growth.chi2");
    g.growth.chi3 = parse_growth(gr["chi3"], "growth.chi3");
    g.growth.chi4 = parse_growth(gr["chi4"], "growth.chi4");
    g.growth.chi5 = parse_growth(gr["chi5"], "growth.chi5");
    g.growth.sigma1 = parse_growth(gr["sigma1"], "growth.sigma1");
    g.growth.sigma2 = parse_growth(gr["sigma2"], "growth.sigma2");
    g.growth.c1 = real_or(gr, "c1", 0.0, "growth");
  } else {
    throw ConfigError("system.family: unknown family '" + c.family + "' (pwa, double_integrator, generic)");
  }
  if (sys["theta_star"]) c.theta_star = parse_mat(sys["theta_star"], "system.theta_star");

  if (const YAML::Node noise = root["noise"]) {
    if (const YAML::Node p = noise["process"]) {
      if (str_or(p, "kind", "gaussian") != "gaussian") throw ConfigError("noise.process.kind: only gaussian is supported");
      c.sigma_w = real_or(p, "sigma", c.sigma_w, "noise.process");
    }
    if (const YAML::Node e = noise["exploratory"]) {
      if (str_or(e, "kind", "uniform") != "uniform") throw ConfigError("noise.exploratory.kind: only uniform is supported");
      if (e["b"]) {
        const double b = parse_real(e["b"], "noise.exploratory.b");
        if (c.family == "pwa") c.ubar = b;
        else if (c.family == "double_integrator") c.ubar2 = b;
        else c.generic.dither = b;
      }
    }
  } else if (c.family == "double_integrator") {
    c.sigma_w = 1.0;
  }

  if (const YAML::Node est = root["estimator"]) {
    c.gamma = real_or(est, "gamma", c.gamma, "estimator");
    if (est["vartheta0"]) c.vartheta0 = parse_mat(est["vartheta0"], "estimator.vartheta0");
  }

  if (const YAML::Node ex = root["excitation"]) {
    ExcitationSettings& s = c.excitation;
    const std::string src = str_or(ex, "source", "closed_form");
    if (src == "closed_form") {
      s.source = CertificateChoice::kClosedForm;
    } else if (src == "moments") {
      s.source = CertificateChoice::kMoments;
      s.moments.c_pe1 = real_or(ex, "c_pe1", 0.0, "excitation");
      s.moments.c_pe2 = real_or(ex, "c_pe2", 0.0, "excitation");
    } else if (src == "given") {
      s.source = CertificateChoice::kGiven;
      s.c_pe = real_or(ex, "c_pe", 0.0, "excitation");
      s.p_pe = real_or(ex, "p_pe", 0.0, "excitation");
    } else {
      throw ConfigError("excitation.source: unknown source '" + src + "' (closed_form, moments, given)");
    }
    if (ex["region"]) s.region = parse_region(ex["region"], "excitation.region");
    if (const YAML::Node mc = ex["mc"]) {
      s.samples = int_or(mc, "samples", s.samples, "excitation.mc");
      s.grid.num_directions = static_cast<int>(int_or(mc, "directions", s.grid.num_directions, "excitation.mc"));
      s.grid.num_states = static_cast<int>(int_or(mc, "states", s.grid.num_states, "excitation.mc"));
      s.grid.num_params = static_cast<int>(int_or(mc, "params", s.grid.num_params, "excitation.mc"));
      s.grid.state_scale = real_or(mc, "state_scale", s.grid.state_scale, "excitation.mc");
      s.grid.param_radius = real_or(mc, "param_radius", s.grid.param_radius, "excitation.mc");
      s.slack = real_or(mc, "slack", s.slack, "excitation.mc");
    }
  }

  if (const YAML::Node run = root["run"]) {
    RunSettings& r = c.run;
    r.T = int_or(run, "T", r.T, "run");
    r.paths = int_or(run, "paths", r.paths, "run");
    r.delta = real_or(run, "delta", r.delta, "run");
    r.seed = static_cast<std::uint64_t>(int_or(run, "seed", static_cast<std::int64_t>(r.seed), "run"));
    if (run["x0"]) r.x0 = parse_vec(run["x0"], "run.x0");
    r.out = str_or(run, "out", "");
    r.workers = static_cast<unsigned>(int_or(run, "workers", 0, "run"));
    r.bound_rows = int_or(run, "bound_rows", 0, "run");
  }
  if (c.run.x0.size() == 0) {
    const int n = c.family == "double_integrator" ? 2 : (c.family == "generic" ? c.generic.n : 1);
    c.run.x0 = Vec::Zero(n);
    c.run.x0[0] = 1.0;
  }

  if (const YAML::Node cv = root["conventions"]) {
    const std::string k = str_or(cv, "burn_in_constant", "2delta");
    if (k == "2delta") c.bounds.burn_in_constant = BurnInConstant::kDefinition2Delta;
    else if (k == "6delta") c.bounds.burn_in_constant = BurnInConstant::kProof6Delta;
    else throw ConfigError("conventions.burn_in_constant: expected 2delta or 6delta");
    const std::string u = str_or(cv, "delta_usage", "theorem");
    if (u == "theorem") c.bounds.delta_usage = DeltaUsage::kTheorem;
    else if (u == "reported") c.bounds.delta_usage = DeltaUsage::kReportedExample;
    else throw ConfigError("conventions.delta_usage: expected theorem or reported");
    c.bounds.min_verification_horizon =
        int_or(cv, "verification_horizon", c.bounds.min_verification_horizon, "conventions");
  }

  if (const YAML::Node b = root["bmsb"]) {
    BmsbProbeOptions& o = c.bmsb.probe;
    o.k = static_cast<int>(int_or(b, "k", o.k, "bmsb"));
    o.gamma_sb = real_or(b, "gamma_sb", o.gamma_sb, "bmsb");
    o.p = real_or(b, "p", o.p, "bmsb");
    o.j = static_cast<int>(int_or(b, "j", o.j, "bmsb"));
    o.outer = int_or(b, "outer", o.outer, "bmsb");
    o.inner = int_or(b, "inner", o.inner, "bmsb");
    if (b["forced_state"]) o.forced_state = parse_real(b["forced_state"], "bmsb.forced_state");
  }

  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  return parse_config(root, path.string());
}

inline void ExperimentConfig::validate() const {
  check_delta(run.delta);
  if (run.T < 1) throw ConfigError("run.T must be >= 1");
  if (run.paths < 1) throw ConfigError("run.paths must be >= 1");
  if (!(gamma > 0.0)) throw ConfigError("estimator.gamma must be > 0");
  if (!(sigma_w >= 0.0) || !std::isfinite(sigma_w)) throw ConfigError("noise.process.sigma must be finite and >= 0");
  for (double th : thresholds)
    if (!(th > 0.0)) throw ConfigError("system.threshold must be > 0");
  if (excitation.samples < 2) throw ConfigError("excitation.mc.samples must be >= 2");
  if (!(excitation.slack >= 0.0 && excitation.slack < 1.0)) throw ConfigError("excitation.mc.slack must be in [0,1)");
  if (bounds.min_verification_horizon < 2) throw ConfigError("conventions.verification_horizon must be >= 2");
}

inline SystemSpec ExperimentConfig::make_system(double threshold) const {
  SystemSpec s;
  try {
    if (family == "pwa") {
      PwaOptions o;
      o.threshold = threshold;
      o.ubar = ubar;
      o.sigma_w = sigma_w;
      o.gamma = gamma;
      if (theta_star) o.theta_star = *theta_star;
      s = make_pwa_system(o);
    } else if (family == "double_integrator") {
      DoubleIntegratorOptions o;
      o.sigma_w = sigma_w;
      o.ubar1 = ubar1;
      o.ubar2 = ubar2;
      o.gamma = gamma;
      o.inner = inner;
      o.projection_radius = projection_radius;
      s = make_double_integrator(o);
      if (theta_star) s.theta_star = *theta_star;
    } else {
      GenericOptions o = generic;
      o.sigma_w = sigma_w;
      o.gamma = gamma;
      if (!theta_star) throw ConfigError("system.theta_star: required for the generic family");
      o.theta_star = *theta_star;
      s = make_generic_system(o);
    }
    if (vartheta0) s.vartheta0 = *vartheta0;
    s.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (run.x0.size() != s.n) throw ConfigError("run.x0 must have " + std::to_string(s.n) + " entries");
  return s;
}

inline ExcitationCertificate ExperimentConfig::make_certificate(const SystemSpec& spec, double threshold) const {
  ExcitationCertificate c;
  switch (excitation.source) {
    case CertificateChoice::kClosedForm:
      if (family == "pwa") {
        c = certificate_from_moments(pwa_moment_certificate(threshold, spec.sigma_w(), ubar),
                                     pwa_excitation_region(threshold));
      } else if (family == "double_integrator") {
        c = certificate_from_moments(double_integrator_certificate(spec.sigma_w(), ubar1, ubar2), Region::all());
      } else {
        throw ConfigError("excitation.source: no closed form for the generic family; use moments or given");
      }
      c.source = CertificateSource::kClosedForm;
      break;
    case CertificateChoice::kMoments:
      try {
        c = certificate_from_moments(excitation.moments, Region::all());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("excitation: ") + e.what());
      }
      break;
    case CertificateChoice::kGiven:
      c.c_pe = excitation.c_pe;
      c.p_pe = excitation.p_pe;
      c.source = CertificateSource::kGiven;
      break;
  }
  if (excitation.region) c.region = *excitation.region;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("excitation: ") + e.what());
  }
  return c;
}

// Output directory: explicit flag, then config, then SYSID_OUT_DIR, then "results".
inline std::filesystem::path resolve_out_dir(const std::string& flag, const ExperimentConfig* cfg) {
  if (!flag.empty()) return flag;
  if (cfg && !cfg->run.out.empty()) return cfg->run.out;
  if (const char* env = std::getenv("SYSID_OUT_DIR"); env && *env) return env;
  return "results";
}

}  // namespace sysid
