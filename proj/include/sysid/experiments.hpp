#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "sysid/bounds.hpp"
#include "sysid/config.hpp"
#include "sysid/excitation.hpp"
#include "sysid/io/atomic_file.hpp"
#include "sysid/io/csv.hpp"
#include "sysid/io/svg.hpp"
#include "sysid/parallel.hpp"
#include "sysid/simulate.hpp"
#include "sysid/stats.hpp"

namespace sysid {

struct PathSummary {
  bool diverged = false;
  Index diverged_at = 0;
  std::vector<double> errors;  // [t-1]
};

// Simulates `paths` trajectories (stream index = path number) and hands each
// finished run to `visit(path, run)` on the worker thread. Diverged runs are
// reported with run = nullptr.
template <class Visit>
void for_each_path(const SystemSpec& spec, const Vec& x0, Index T, std::int64_t paths, std::uint64_t seed,
                   unsigned workers, Visit&& visit, const SimulateOptions& opt = {}) {
  parallel_for(paths, workers == 0 ? default_workers() : workers, [&](std::int64_t p) {
    std::optional<EstimationRun> run;
    try {
      run.emplace(simulate(spec, x0, T, seed, static_cast<std::uint64_t>(p), opt));
    } catch (const SimulationDiverged& e) {
      visit(p, static_cast<const EstimationRun*>(nullptr), e.step());
      return;
    }
    visit(p, &*run, Index{0});
  });
}

// Mean spectral error per t over the non-diverged paths, summed in path order.
struct MeanErrorCurve {
  std::vector<double> mean;  // [t-1]
  std::int64_t used = 0;
  std::int64_t excluded = 0;
};

inline MeanErrorCurve mean_error_curve(const SystemSpec& spec, const Vec& x0, Index T, std::int64_t paths,
                                       std::uint64_t seed, unsigned workers) {
  std::vector<PathSummary> per(static_cast<std::size_t>(paths));
  SimulateOptions opt;
  opt.record_estimates = false;
  for_each_path(
      spec, x0, T, paths, seed, workers,
      [&](std::int64_t p, const EstimationRun* run, Index at) {
        auto& s = per[static_cast<std::size_t>(p)];
        if (!run) {
          s.diverged = true;
          s.diverged_at = at;
          return;
        }
        s.errors = run->errors;
      },
      opt);
  MeanErrorCurve c;
  c.mean.assign(static_cast<std::size_t>(T), 0.0);
  for (const auto& s : per) {
    if (s.diverged) {
      ++c.excluded;
      continue;
    }
    ++c.used;
    for (std::size_t i = 0; i < s.errors.size(); ++i) c.mean[i] += s.errors[i];
  }
  if (c.used > 0)
    for (double& v : c.mean) v /= static_cast<double>(c.used);
  return c;
}

// ---------------------------------------------------------------------------
// Coverage of the error bound

struct CoverageOptions {
  double bound_scale = 1.0;  // multiplies e(t); values < 1 are a harness sanity hook
  BoundOptions bounds;
};

struct CoverageReport {
  std::int64_t num_paths = 0;
  std::int64_t num_covered = 0;
  std::int64_t excluded = 0;  // diverged paths
  double empirical_rate = 0.0;
  double wilson_lower_95 = 0.0;
  double target = 0.0;
  bool pass = false;
  bool interval_empty = false;
  Index first = 0, last = 0;  // evaluated interval
  ExtTime burn_in = ExtTime::infinite();
  ExtTime excited = ExtTime::infinite();
  // Extended bound over t = 1..T, when the improvement condition holds.
  bool extended_evaluated = false;
  std::int64_t extended_covered = 0;
  double extended_rate = 0.0;
  double extended_wilson_lower_95 = 0.0;
  double worst_ratio = 0.0;  // max over paths and t in the interval of err / e
};

inline CoverageReport coverage_experiment(const SystemSpec& spec, const ExcitationCertificate& cert, double delta,
                                          const Vec& x0, Index T, std::int64_t paths, std::uint64_t seed,
                                          unsigned workers, const CoverageOptions& opt = {}) {
  check_delta(delta);
  const BoundProfile prof = make_bound_profile(spec, cert, delta, x0, T, opt.bounds);
  CoverageReport rep;
  rep.target = 1.0 - delta;
  rep.burn_in = prof.burn_in.time;
  rep.excited = prof.excited;
  const auto [first, last] = prof.pe_interval(T);
  rep.first = first;
  rep.last = last;
  rep.interval_empty = first > last;
  const bool extended = prof.improvement_condition();
  rep.extended_evaluated = extended;

  std::vector<double> e(static_cast<std::size_t>(T)), et;
  for (Index t = 1; t <= T; ++t) e[static_cast<std::size_t>(t - 1)] = opt.bound_scale * prof.e(spec, t);
  if (extended) {
    et.resize(static_cast<std::size_t>(T));
    for (Index t = 1; t <= T; ++t) et[static_cast<std::size_t>(t - 1)] = opt.bound_scale * prof.e_tilde(spec, t);
  }

  struct Outcome {
    bool diverged = false, covered = false, ext_covered = false;
    double worst = 0.0;
  };
  std::vector<Outcome> out(static_cast<std::size_t>(paths));
  SimulateOptions sopt;
  sopt.record_estimates = false;
  for_each_path(
      spec, x0, T, paths, seed, workers,
      [&](std::int64_t p, const EstimationRun* run, Index) {
        Outcome& o = out[static_cast<std::size_t>(p)];
        if (!run) {
          o.diverged = true;
          return;
        }
        o.covered = true;
        for (Index t = first; t <= last; ++t) {
          const double err = run->errors[static_cast<std::size_t>(t - 1)];
          const double bound = e[static_cast<std::size_t>(t - 1)];
          o.worst = std::max(o.worst, err / bound);
          if (!(err <= bound)) o.covered = false;
        }
        if (extended) {
          o.ext_covered = true;
          for (Index t = 1; t <= T; ++t)
            if (!(run->errors[static_cast<std::size_t>(t - 1)] <= et[static_cast<std::size_t>(t - 1)])) {
              o.ext_covered = false;
              break;
            }
        }
      },
      sopt);
  for (const Outcome& o : out) {
    if (o.diverged) {
      ++rep.excluded;
      continue;
    }
    ++rep.num_paths;
    rep.num_covered += o.covered;
    rep.extended_covered += o.ext_covered;
    rep.worst_ratio = std::max(rep.worst_ratio, o.worst);
  }
  if (rep.num_paths > 0) {
    rep.empirical_rate = static_cast<double>(rep.num_covered) / static_cast<double>(rep.num_paths);
    rep.wilson_lower_95 = wilson_interval(rep.num_covered, rep.num_paths).lower;
    rep.extended_rate = static_cast<double>(rep.extended_covered) / static_cast<double>(rep.num_paths);
    rep.extended_wilson_lower_95 = wilson_interval(rep.extended_covered, rep.num_paths).lower;
  }
  // An empty interval is reported, not failed.
  rep.pass = rep.interval_empty || rep.wilson_lower_95 >= rep.target - 0.02;
  return rep;
}

// ---------------------------------------------------------------------------
// Gramian sandwich on paths whose noise stays inside the wbar envelope

struct SandwichReport {
  std::int64_t paths = 0;
  std::int64_t envelope_paths = 0;
  std::int64_t upper_violations = 0;  // (path, t) pairs with lambda_max > beta_max
  Index first = 0, last = 0;
  bool interval_empty = false;
  std::int64_t lower_ok_paths = 0;  // envelope paths with lambda_min above the PE line on the whole interval
  double lower_fraction = 0.0;
  double min_lower_ratio = 0.0;  // min over envelope paths and t of lambda_min / PE line
};

inline SandwichReport gramian_sandwich(const SystemSpec& spec, const ExcitationCertificate& cert, double delta,
                                       const Vec& x0, Index T, std::int64_t paths, std::uint64_t seed,
                                       unsigned workers, const BoundOptions& bopt = {},
                                       std::optional<std::pair<Index, Index>> interval_override = {}) {
  const BoundProfile prof = make_bound_profile(spec, cert, delta, x0, T, bopt);
  SandwichReport rep;
  rep.paths = paths;
  auto iv = interval_override ? *interval_override : prof.pe_interval(T);
  rep.first = iv.first;
  rep.last = std::min(iv.second, T);
  rep.interval_empty = rep.first > rep.last;
  struct Outcome {
    bool envelope = false, lower_ok = false;
    std::int64_t upper_viol = 0;
    double min_ratio = std::numeric_limits<double>::infinity();
  };
  std::vector<Outcome> out(static_cast<std::size_t>(paths));
  SimulateOptions sopt;
  sopt.record_estimates = false;
  for_each_path(
      spec, x0, T, paths, seed, workers,
      [&](std::int64_t p, const EstimationRun* run, Index) {
        if (!run) return;
        Outcome& o = out[static_cast<std::size_t>(p)];
        o.envelope = true;
        for (Index t = 1; t <= T; ++t)
          if (run->noise[static_cast<std::size_t>(t - 1)].norm() > prof.wbar[static_cast<std::size_t>(t - 1)]) {
            o.envelope = false;
            break;
          }
        if (!o.envelope) return;
        for (Index t = 1; t <= T; ++t)
          if (run->gram_max_eig[static_cast<std::size_t>(t - 1)] > prof.beta_max[static_cast<std::size_t>(t - 1)])
            ++o.upper_viol;
        o.lower_ok = true;
        for (Index t = rep.first; t <= rep.last; ++t) {
          const double line = pe_lower_bound(cert, spec.gamma, static_cast<double>(t));
          const double r = run->gram_min_eig[static_cast<std::size_t>(t - 1)] / line;
          o.min_ratio = std::min(o.min_ratio, r);
          if (r < 1.0) o.lower_ok = false;
        }
      },
      sopt);
  rep.min_lower_ratio = std::numeric_limits<double>::infinity();
  for (const Outcome& o : out) {
    if (!o.envelope) continue;
    ++rep.envelope_paths;
    rep.upper_violations += o.upper_viol;
    rep.lower_ok_paths += o.lower_ok;
    rep.min_lower_ratio = std::min(rep.min_lower_ratio, o.min_ratio);
  }
  if (rep.envelope_paths > 0)
    rep.lower_fraction = static_cast<double>(rep.lower_ok_paths) / static_cast<double>(rep.envelope_paths);
  return rep;
}

// ---------------------------------------------------------------------------
// Trajectory growth bound for the double integrator:
//   |x(t)| <= 5|xi|^2 + 2.5 (sum_{i<t} |u(i)|)^2 + 5 (sum_{i<=t} |w(i)|)^2 + 2.5 t^2 + 2.5

struct GrowthInvariantReport {
  std::int64_t paths = 0;
  std::int64_t steps_checked = 0;
  std::int64_t violations = 0;
  double max_ratio = 0.0;  // max |x(t)| / bound(t)
};

inline double double_integrator_growth_bound(double xi_norm, double sum_u, double sum_w, double t) {
  return 5.0 * xi_norm * xi_norm + 2.5 * sum_u * sum_u + 5.0 * sum_w * sum_w + 2.5 * t * t + 2.5;
}

inline GrowthInvariantReport growth_invariant_check(const SystemSpec& spec, const Vec& x0, Index T,
                                                    std::int64_t paths, std::uint64_t seed, unsigned workers) {
  struct Outcome {
    std::int64_t steps = 0, viol = 0;
    double ratio = 0.0;
  };
  std::vector<Outcome> out(static_cast<std::size_t>(paths));
  SimulateOptions sopt;
  sopt.record_estimates = false;
  for_each_path(
      spec, x0, T, paths, seed, workers,
      [&](std::int64_t p, const EstimationRun* run, Index) {
        Outcome& o = out[static_cast<std::size_t>(p)];
        if (!run) {
          ++o.viol;
          return;
        }
        double su = 0.0, sw = 0.0;
        const double xi = x0.norm();
        for (Index t = 0; t <= T; ++t) {
          if (t > 0) {
            su += run->controls[static_cast<std::size_t>(t - 1)].norm();
            sw += run->noise[static_cast<std::size_t>(t - 1)].norm();
          }
          const double b = double_integrator_growth_bound(xi, su, sw, static_cast<double>(t));
          const double x = run->states[static_cast<std::size_t>(t)].norm();
          ++o.steps;
          o.ratio = std::max(o.ratio, x / b);
          if (x > b) ++o.viol;
        }
      },
      sopt);
  GrowthInvariantReport rep;
  rep.paths = paths;
  for (const Outcome& o : out) {
    rep.steps_checked += o.steps;
    rep.violations += o.viol;
    rep.max_ratio = std::max(rep.max_ratio, o.ratio);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// CSV emitters

inline std::string run_csv(const SystemSpec& spec, const EstimationRun& run) {
  io::CsvBuilder csv;
  csv.meta("system", spec.name);
  csv.meta("gamma", spec.gamma);
  std::vector<std::string> cols{"t"};
  for (int i = 1; i <= spec.n; ++i) cols.push_back(fmt::format("x_{}", i));
  for (int j = 1; j <= spec.m; ++j) cols.push_back(fmt::format("u_{}", j));
  cols.insert(cols.end(), {"err", "gmin", "gmax"});
  csv.header(cols);
  const Index T = run.steps();
  for (Index t = 0; t <= T; ++t) {
    std::vector<double> row{static_cast<double>(t)};
    const Vec& x = run.states[static_cast<std::size_t>(t)];
    for (Index i = 0; i < x.size(); ++i) row.push_back(x[i]);
    for (int j = 0; j < spec.m; ++j)
      row.push_back(t < T ? run.controls[static_cast<std::size_t>(t)][j] : std::numeric_limits<double>::quiet_NaN());
    if (t == 0) {
      row.push_back(spectral_error(spec.vartheta0, spec.theta_star));
      row.push_back(spec.gamma);
      row.push_back(spec.gamma);
    } else {
      row.push_back(run.errors[static_cast<std::size_t>(t - 1)]);
      row.push_back(run.gram_min_eig[static_cast<std::size_t>(t - 1)]);
      row.push_back(run.gram_max_eig[static_cast<std::size_t>(t - 1)]);
    }
    csv.row(row);
  }
  return csv.str();
}

inline void certificate_meta(io::CsvBuilder& csv, const ExcitationCertificate& cert) {
  csv.meta("certificate_source", to_string(cert.source));
  csv.meta("region", cert.region.describe());
  csv.meta("c_PE", cert.c_pe);
  csv.meta("p_PE", cert.p_pe);
  if (cert.source == CertificateSource::kFromMoments || cert.moments.c_pe1 > 0.0) {
    csv.meta("c_PE1", cert.moments.c_pe1);
    csv.meta("c_PE2", cert.moments.c_pe2);
  }
}

// Rows t = 1..rows; e_tilde is nan when the improvement condition fails.
inline std::string bounds_csv(const SystemSpec& spec, const BoundProfile& prof, Index rows) {
  rows = std::min(rows, prof.horizon);
  io::CsvBuilder csv;
  csv.meta("system", spec.name);
  csv.meta("delta", prof.delta);
  csv.meta("x0_norm", prof.x0.norm());
  csv.meta("T_burn_in", prof.burn_in.time.str());
  csv.meta("T_burn_in_horizon", std::to_string(prof.burn_in.horizon));
  csv.meta("T_burn_in_check", prof.burn_in.horizon_verified ? "horizon-verified" : "not verified");
  csv.meta("T_burn_in_slack_growing", prof.burn_in.slack_growing ? "yes" : "no");
  csv.meta("T_excited", prof.excited.str());
  csv.meta("burn_in_constant", to_string(prof.options.burn_in_constant));
  csv.meta("delta_usage", to_string(prof.options.delta_usage));
  csv.meta("improvement_condition", prof.improvement_condition() ? "holds" : "violated");
  certificate_meta(csv, prof.cert);
  csv.meta("wbar_xbar_zbar_delta", prof.delta / 3.0);
  csv.header({"t", "wbar", "xbar", "zbar", "beta_max", "e", "e_tilde"});
  const bool ext = prof.improvement_condition();
  for (Index t = 1; t <= rows; ++t) {
    const auto i = static_cast<std::size_t>(t - 1);
    csv.row({static_cast<double>(t), prof.wbar[i], prof.xbar[i + 1], prof.zbar[i], prof.beta_max[i], prof.e(spec, t),
             ext ? prof.e_tilde(spec, t) : std::numeric_limits<double>::quiet_NaN()});
  }
  return csv.str();
}

// ---------------------------------------------------------------------------
// Plain-text report

class Report {
 public:
  void line(const std::string& key, const std::string& value) { text_ += key + " = " + value + "\n"; }
  void line(const std::string& key, double value) { line(key, io::num(value)); }
  void check(const std::string& name, bool pass, const std::string& detail) {
    text_ += fmt::format("[{}] {}: {}\n", pass ? "PASS" : "FAIL", name, detail);
    all_pass_ = all_pass_ && pass;
  }
  void section(const std::string& title) { text_ += "\n## " + title + "\n"; }
  const std::string& str() const { return text_; }
  bool all_pass() const { return all_pass_; }

 private:
  std::string text_;
  bool all_pass_ = true;
};

// ---------------------------------------------------------------------------
// Example 1: PWA system over several thresholds

inline constexpr double kReportedBurnIn = 1724.0;
inline const std::map<double, double> kReportedExcited{{3500.0, 1724.0}, {5000.0, 2224.0}};

struct Example1Threshold {
  double threshold = 0.0;
  ExcitationCertificate cert;
  // [usage][constant]: usage 0 = T(delta), 1 = T(delta/3); constant 0 = 2 delta, 1 = 6 delta
  BurnInResult burn[2][2];
  ExtTime excited[2] = {ExtTime::infinite(), ExtTime::infinite()};
  MeanErrorCurve curve;
};

struct Example1Result {
  std::vector<Example1Threshold> per_threshold;
  bool burn_in_reproduced = false;
  bool excited_reproduced = false;
  bool figure_final_gap = false;
  bool figure_plateau = false;
  std::string report;
  bool all_pass() const { return burn_in_reproduced && excited_reproduced && figure_final_gap && figure_plateau; }
};

inline bool within_rel(double v, double target, double tol) { return std::abs(v - target) <= tol * target; }

// Times for every convention, without simulation.
inline Example1Threshold example1_times(const ExperimentConfig& cfg, double threshold) {
  Example1Threshold r;
  r.threshold = threshold;
  const SystemSpec spec = cfg.make_system(threshold);
  r.cert = cfg.make_certificate(spec, threshold);
  for (int u = 0; u < 2; ++u) {
    BoundOptions o = cfg.bounds;
    o.delta_usage = u == 0 ? DeltaUsage::kTheorem : DeltaUsage::kReportedExample;
    for (int k = 0; k < 2; ++k) {
      o.burn_in_constant = k == 0 ? BurnInConstant::kDefinition2Delta : BurnInConstant::kProof6Delta;
      r.burn[u][k] = burn_in_time(spec, r.cert, cfg.run.delta, cfg.run.x0, o);
    }
    r.excited[u] = excited_time(spec, r.cert, cfg.run.delta, cfg.run.x0, o);
  }
  return r;
}

inline std::string threshold_label(double th) { return std::isinf(th) ? "inf" : io::num(th); }

inline Example1Result reproduce_example1(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                         bool simulate_paths = true) {
  if (cfg.family != "pwa") throw ConfigError("reproduce-example1 needs system.family = pwa");
  Example1Result res;
  for (double th : cfg.thresholds) {
    Example1Threshold r = example1_times(cfg, th);
    if (simulate_paths)
      r.curve = mean_error_curve(cfg.make_system(th), cfg.run.x0, cfg.run.T, cfg.run.paths, cfg.run.seed,
                                 cfg.run.workers);
    res.per_threshold.push_back(std::move(r));
  }

  Report rep;
  rep.line("delta", cfg.run.delta);
  rep.line("x0", io::num(cfg.run.x0[0]));
  rep.line("T", std::to_string(cfg.run.T));
  rep.line("paths", std::to_string(cfg.run.paths));
  rep.line("seed", std::to_string(cfg.run.seed));

  io::CsvBuilder times;
  times.meta("delta", cfg.run.delta);
  times.header({"xbar", "c_PE", "p_PE", "burn_in_T(delta)_2delta", "burn_in_T(delta)_6delta", "burn_in_T(delta/3)_2delta",
                "burn_in_T(delta/3)_6delta", "excited_T(delta)", "excited_T(delta/3)", "paths_excluded"});
  bool burn_ok_any = false;
  for (int u = 0; u < 2 && !burn_ok_any; ++u)
    for (int k = 0; k < 2 && !burn_ok_any; ++k) {
      bool all = true;
      for (const auto& r : res.per_threshold)
        all = all && r.burn[u][k].time.is_finite() &&
              within_rel(static_cast<double>(r.burn[u][k].time.value()), kReportedBurnIn, 0.10);
      burn_ok_any = all;
    }
  bool excited_ok = true;
  for (const auto& r : res.per_threshold) {
    times.row_strings({threshold_label(r.threshold), io::num(r.cert.c_pe), io::num(r.cert.p_pe), r.burn[0][0].time.str(),
                       r.burn[0][1].time.str(), r.burn[1][0].time.str(), r.burn[1][1].time.str(), r.excited[0].str(),
                       r.excited[1].str(), std::to_string(r.curve.excluded)});
    bool ok = false;
    if (std::isinf(r.threshold)) {
      ok = r.excited[0].is_infinite() && r.excited[1].is_infinite();
    } else if (auto it = kReportedExcited.find(r.threshold); it != kReportedExcited.end()) {
      for (int u = 0; u < 2; ++u)
        ok = ok || (r.excited[u].is_finite() && within_rel(static_cast<double>(r.excited[u].value()), it->second, 0.10));
    } else {
      ok = true;  // no reported value to compare against
    }
    excited_ok = excited_ok && ok;
  }
  res.burn_in_reproduced = burn_ok_any;
  res.excited_reproduced = excited_ok;

  rep.section("times");
  for (const auto& r : res.per_threshold) {
    rep.line(fmt::format("xbar={} c_PE", threshold_label(r.threshold)), r.cert.c_pe);
    rep.line(fmt::format("xbar={} p_PE", threshold_label(r.threshold)), r.cert.p_pe);
    for (int u = 0; u < 2; ++u)
      for (int k = 0; k < 2; ++k)
        rep.line(fmt::format("xbar={} burn_in {} {}", threshold_label(r.threshold),
                             to_string(u == 0 ? DeltaUsage::kTheorem : DeltaUsage::kReportedExample),
                             to_string(k == 0 ? BurnInConstant::kDefinition2Delta : BurnInConstant::kProof6Delta)),
                 r.burn[u][k].time.str() + (r.burn[u][k].slack_growing ? " (horizon-verified, slack growing)" : ""));
    for (int u = 0; u < 2; ++u)
      rep.line(fmt::format("xbar={} excited {}", threshold_label(r.threshold),
                           to_string(u == 0 ? DeltaUsage::kTheorem : DeltaUsage::kReportedExample)),
               r.excited[u].str());
  }
  rep.section("checks");
  rep.check("burn-in within 10% of 1724 under some convention", burn_ok_any, "see times above");
  rep.check("excited time within 10% of reported values, inf for xbar=inf", excited_ok, "see times above");

  if (simulate_paths) {
    const Index T = cfg.run.T;
    const Example1Threshold* finite_small = nullptr;
    const Example1Threshold* infinite = nullptr;
    for (const auto& r : res.per_threshold) {
      if (std::isinf(r.threshold)) infinite = &r;
      else if (!finite_small || r.threshold < finite_small->threshold) finite_small = &r;
    }
    if (finite_small && infinite && T >= 2) {
      auto at = [](const MeanErrorCurve& c, Index t) { return c.mean[static_cast<std::size_t>(t - 1)]; };
      const double ei = at(infinite->curve, T), ef = at(finite_small->curve, T);
      const double pi = ei / at(infinite->curve, T / 2), pf = ef / at(finite_small->curve, T / 2);
      res.figure_final_gap = ei < 0.5 * ef;
      res.figure_plateau = pf >= 0.8 && pi <= 0.8;
      rep.check("err(inf, T) < 0.5 err(smallest xbar, T)", res.figure_final_gap,
                fmt::format("{} vs {}", io::num(ei), io::num(ef)));
      rep.check("plateau: ratio(T/T/2) >= 0.8 for smallest xbar, <= 0.8 for inf", res.figure_plateau,
                fmt::format("{} and {}", io::num(pf), io::num(pi)));
    } else {
      res.figure_final_gap = res.figure_plateau = true;
      rep.line("figure_checks", "skipped (needs a finite and an infinite threshold)");
    }

    io::CsvBuilder curve;
    curve.meta("paths", std::to_string(cfg.run.paths));
    curve.meta("seed", std::to_string(cfg.run.seed));
    std::vector<std::string> cols{"t"};
    for (const auto& r : res.per_threshold) cols.push_back("mean_error_xbar_" + threshold_label(r.threshold));
    curve.header(cols);
    std::vector<io::Series> series;
    for (const auto& r : res.per_threshold) series.push_back({"xbar = " + threshold_label(r.threshold), {}, {}});
    for (Index t = 1; t <= T; ++t) {
      std::vector<double> row{static_cast<double>(t)};
      for (std::size_t k = 0; k < res.per_threshold.size(); ++k) {
        const double v = res.per_threshold[k].curve.mean[static_cast<std::size_t>(t - 1)];
        row.push_back(v);
        // Thin the plot to about 2000 points per series.
        if (t % std::max<Index>(1, T / 2000) == 0 || t == 1) {
          series[k].x.push_back(static_cast<double>(t));
          series[k].y.push_back(v);
        }
      }
      curve.row(row);
    }
    io::write_file_atomic(out_dir / "example1_mean_error.csv", curve.str());
    io::write_file_atomic(out_dir / "example1_mean_error.svg",
                          io::log_y_plot(series, {"PWA system: mean estimation error", "t", "mean |theta_hat - theta*|"}));
  } else {
    res.figure_final_gap = res.figure_plateau = true;
  }
  io::write_file_atomic(out_dir / "example1_times.csv", times.str());
  res.report = rep.str();
  io::write_file_atomic(out_dir / "example1_report.txt", res.report);
  return res;
}

// ---------------------------------------------------------------------------
// Example 2: double integrator

struct Example2Result {
  ExcitationCertificate cert;
  MomentCertificate closed_form;
  double c_pe2_display_variant = 0.0;
  bool certificate_matches = false;
  bool polynomial = false;
  BurnInResult burn_in;
  RateEnvelope rate;
  double e2 = 0, e4 = 0, e6 = 0;
  CoverageReport coverage;
  GrowthInvariantReport growth;
  std::string report;
  bool all_pass() const {
    return certificate_matches && polynomial && rate.bounded && e6 < e4 && e4 < e2 && coverage.pass &&
           growth.violations == 0;
  }
};

inline Example2Result reproduce_example2(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                         Index rate_lo = 1000, Index rate_hi = 1000000) {
  if (cfg.family != "double_integrator") throw ConfigError("reproduce-example2 needs system.family = double_integrator");
  Example2Result res;
  const SystemSpec spec = cfg.make_system();
  res.cert = cfg.make_certificate(spec);
  res.closed_form = double_integrator_certificate(spec.sigma_w(), cfg.ubar1, cfg.ubar2);
  res.c_pe2_display_variant = double_integrator_c_pe2_display_variant(spec.sigma_w(), cfg.ubar1, cfg.ubar2);
  const ExcitationCertificate direct = certificate_from_moments(res.closed_form, Region::all());
  res.certificate_matches = res.cert.c_pe == direct.c_pe && res.cert.p_pe == direct.p_pe;
  res.polynomial = spec.growth.polynomial();
  const Vec& x0 = cfg.run.x0;
  const double delta = cfg.run.delta;
  res.burn_in = burn_in_time(spec, res.cert, delta, x0, cfg.bounds);
  res.rate = rate_envelope(spec, res.cert, delta, x0, rate_lo, rate_hi);
  res.e2 = error_bound_e(spec, res.cert, 100, delta, x0);
  res.e4 = error_bound_e(spec, res.cert, 10000, delta, x0);
  res.e6 = error_bound_e(spec, res.cert, 1000000, delta, x0);
  CoverageOptions copt;
  copt.bounds = cfg.bounds;
  res.coverage = coverage_experiment(spec, res.cert, delta, x0, cfg.run.T, cfg.run.paths, cfg.run.seed,
                                     cfg.run.workers, copt);
  res.growth = growth_invariant_check(spec, x0, cfg.run.T, cfg.run.paths, cfg.run.seed, cfg.run.workers);

  Report rep;
  rep.line("delta", delta);
  rep.line("sigma_w", spec.sigma_w());
  rep.line("ubar1", cfg.ubar1);
  rep.line("ubar2", cfg.ubar2);
  rep.line("c_PE1", res.closed_form.c_pe1);
  rep.line("c_PE2", res.closed_form.c_pe2);
  rep.line("c_PE2 (one-line display variant, not used)", res.c_pe2_display_variant);
  rep.line("c_PE", res.cert.c_pe);
  rep.line("p_PE", res.cert.p_pe);
  rep.line("T_burn_in", res.burn_in.time.str());
  rep.line("T_burn_in_horizon", std::to_string(res.burn_in.horizon));
  rep.line("T_burn_in_slack_growing", res.burn_in.slack_growing ? "yes" : "no");
  rep.line("T_excited", "inf");
  rep.line("rate_sup", res.rate.sup_value);
  rep.line("rate_trend", res.rate.trend);
  rep.line("e(1e2)", res.e2);
  rep.line("e(1e4)", res.e4);
  rep.line("e(1e6)", res.e6);
  rep.line("coverage_paths", std::to_string(res.coverage.num_paths));
  rep.line("coverage_interval", res.coverage.interval_empty
                                    ? std::string("interval empty (T_burn_in beyond run horizon)")
                                    : fmt::format("[{}, {}]", res.coverage.first, res.coverage.last));
  rep.line("coverage_rate", res.coverage.empirical_rate);
  rep.line("coverage_wilson_lower_95", res.coverage.wilson_lower_95);
  rep.line("extended_coverage_rate", res.coverage.extended_rate);
  rep.line("extended_coverage_wilson_lower_95", res.coverage.extended_wilson_lower_95);
  rep.line("growth_steps_checked", std::to_string(res.growth.steps_checked));
  rep.line("growth_max_ratio", res.growth.max_ratio);
  rep.section("checks");
  rep.check("certificate matches closed forms", res.certificate_matches, "two code paths");
  rep.check("polynomial growth certificate", res.polynomial, "chi1, chi3, chi4, sigma2 APB");
  rep.check("rate envelope trend <= 1.1", res.rate.bounded, io::num(res.rate.trend));
  rep.check("e(1e6) < e(1e4) < e(1e2)", res.e6 < res.e4 && res.e4 < res.e2,
            fmt::format("{} < {} < {}", io::num(res.e6), io::num(res.e4), io::num(res.e2)));
  rep.check("coverage", res.coverage.pass,
            res.coverage.interval_empty ? "interval empty, reported not failed"
                                        : fmt::format("Wilson lower {}", io::num(res.coverage.wilson_lower_95)));
  rep.check("trajectory growth bound", res.growth.violations == 0, fmt::format("{} violations", res.growth.violations));
  res.report = rep.str();

  io::CsvBuilder rate;
  rate.meta("delta", delta);
  rate.meta("trend", res.rate.trend);
  rate.header({"t", "e", "envelope"});
  for (std::size_t i = 0; i < res.rate.t.size(); ++i) {
    const double t = res.rate.t[i];
    rate.row({t, res.rate.value[i] / std::sqrt(t / std::log(t)), res.rate.value[i]});
  }
  std::vector<io::Series> series{{"e(t)", {}, {}}, {"e(t) sqrt(t/ln t)", res.rate.t, res.rate.value}};
  for (std::size_t i = 0; i < res.rate.t.size(); ++i) {
    series[0].x.push_back(res.rate.t[i]);
    series[0].y.push_back(res.rate.value[i] / std::sqrt(res.rate.t[i] / std::log(res.rate.t[i])));
  }
  io::write_file_atomic(out_dir / "example2_rate.csv", rate.str());
  io::write_file_atomic(out_dir / "example2_rate.svg",
                        io::log_y_plot(series, {"Double integrator: error bound rate", "t", "value"}));
  io::write_file_atomic(out_dir / "example2_report.txt", res.report);
  return res;
}

}  // namespace sysid
