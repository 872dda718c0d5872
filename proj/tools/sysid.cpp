#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <yaml-cpp/exceptions.h>

#include "sysid/bounds.hpp"
#include "sysid/config.hpp"
#include "sysid/excitation.hpp"
#include "sysid/experiments.hpp"
#include "sysid/io/atomic_file.hpp"
#include "sysid/io/csv.hpp"
#include "sysid/simulate.hpp"

namespace fs = std::filesystem;
using namespace sysid;

namespace {

constexpr int kOk = 0;
constexpr int kFailedCheck = 1;
constexpr int kBadInput = 2;

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct Loaded {
  ExperimentConfig cfg;
  fs::path out;
};

Loaded load(const Common& c) {
  Loaded l{load_config(c.config), {}};
  if (c.seed) l.cfg.run.seed = *c.seed;
  l.out = resolve_out_dir(c.out, &l.cfg);
  io::ensure_writable_dir(l.out);
  return l;
}

int cmd_simulate(const Common& c) {
  Loaded l = load(c);
  const SystemSpec spec = l.cfg.make_system();
  int code = kOk;
  EstimationRun run;
  try {
    run = simulate(spec, l.cfg.run.x0, l.cfg.run.T, l.cfg.run.seed);
  } catch (const SimulationDiverged& e) {
    std::cerr << e.what() << "; writing the truncated run\n";
    run = e.truncated_run();
    run.states.pop_back();
    run.controls.resize(run.regressors.size());
    run.noise.resize(run.regressors.size());
    code = kFailedCheck;
  }
  io::write_file_atomic(l.out / "run.csv", run_csv(spec, run));
  std::cout << "wrote " << (l.out / "run.csv").string() << "\n";
  return code;
}

int cmd_bounds(const Common& c) {
  Loaded l = load(c);
  const SystemSpec spec = l.cfg.make_system();
  const ExcitationCertificate cert = l.cfg.make_certificate(spec);
  const Index rows = l.cfg.run.bound_rows > 0 ? l.cfg.run.bound_rows : l.cfg.run.T;
  const BoundProfile prof = make_bound_profile(spec, cert, l.cfg.run.delta, l.cfg.run.x0, rows, l.cfg.bounds);
  io::write_file_atomic(l.out / "bounds.csv", bounds_csv(spec, prof, rows));
  std::cout << fmt::format("T_burn_in = {}\nT_excited = {}\nimprovement condition {}\nwrote {}\n", prof.burn_in.time.str(),
                           prof.excited.str(), prof.improvement_condition() ? "holds" : "violated",
                           (l.out / "bounds.csv").string());
  return kOk;
}

int cmd_excitation(const Common& c) {
  Loaded l = load(c);
  const SystemSpec spec = l.cfg.make_system();
  const ExcitationCertificate cert = l.cfg.make_certificate(spec);
  const ExcitationSettings& ex = l.cfg.excitation;
  Report rep;
  rep.line("system", spec.name);
  rep.line("certificate_source", to_string(cert.source));
  rep.line("region", cert.region.describe());
  rep.line("c_PE", cert.c_pe);
  rep.line("p_PE", cert.p_pe);
  if (cert.moments.c_pe1 > 0.0) {
    rep.line("c_PE1", cert.moments.c_pe1);
    rep.line("c_PE2", cert.moments.c_pe2);
  }
  if (l.cfg.family == "pwa") {
    const PwaMomentDetails det = pwa_moment_details(l.cfg.thresholds.front(), spec.sigma_w(), l.cfg.ubar);
    rep.line("b_w", det.b_w);
    rep.line("b_s", det.b_s);
  } else if (l.cfg.family == "double_integrator") {
    rep.line("c_PE2 (one-line display variant, not used)",
             double_integrator_c_pe2_display_variant(spec.sigma_w(), l.cfg.ubar1, l.cfg.ubar2));
  }
  rep.line("samples_per_grid_point", std::to_string(ex.samples));
  rep.line("directions", std::to_string(ex.grid.num_directions));
  rep.line("states", std::to_string(ex.grid.num_states));
  rep.line("params", std::to_string(ex.grid.num_params));

  io::CsvBuilder csv;
  csv.header({"check", "observed", "bound", "claimed", "grid_points", "pass"});
  const ProbabilityCheckReport pr = mc_excitation_probability(spec, cert.region, cert, ex.grid, ex.samples, l.cfg.run.seed);
  rep.line("scope", pr.scope);
  rep.check("tail probability", pr.pass,
            fmt::format("min observed {}, min Wilson lower {} vs p_PE {}", io::num(pr.min_observed_probability),
                        io::num(pr.min_wilson_lower), io::num(cert.p_pe)));
  csv.row_strings({"probability", io::num(pr.min_observed_probability), io::num(pr.min_wilson_lower), io::num(cert.p_pe),
                   std::to_string(pr.grid_points), pr.pass ? "1" : "0"});
  if (cert.moments.c_pe1 > 0.0) {
    const MomentCheckReport mr =
        mc_verify_moments(spec, cert.region, cert.moments, ex.grid, ex.samples, l.cfg.run.seed, ex.slack);
    rep.check("first moment and variance", mr.pass,
              fmt::format("min mean lower {} vs {}, max variance upper {} vs {}", io::num(mr.min_mean_lower),
                          io::num(cert.moments.c_pe1), io::num(mr.max_var_upper), io::num(cert.moments.c_pe2)));
    csv.row_strings({"mean", io::num(mr.min_observed_mean), io::num(mr.min_mean_lower), io::num(cert.moments.c_pe1),
                     std::to_string(mr.grid_points), mr.pass ? "1" : "0"});
    csv.row_strings({"variance", io::num(mr.max_observed_var), io::num(mr.max_var_upper), io::num(cert.moments.c_pe2),
                     std::to_string(mr.grid_points), mr.pass ? "1" : "0"});
  }
  io::write_file_atomic(l.out / "excitation.csv", csv.str());
  io::write_file_atomic(l.out / "excitation_report.txt", rep.str());
  std::cout << rep.str();
  return rep.all_pass() ? kOk : kFailedCheck;
}

int cmd_coverage(const Common& c) {
  Loaded l = load(c);
  const SystemSpec spec = l.cfg.make_system();
  const ExcitationCertificate cert = l.cfg.make_certificate(spec);
  CoverageOptions opt;
  opt.bounds = l.cfg.bounds;
  const RunSettings& r = l.cfg.run;
  const CoverageReport cr = coverage_experiment(spec, cert, r.delta, r.x0, r.T, r.paths, r.seed, r.workers, opt);
  Report rep;
  rep.line("num_paths", std::to_string(cr.num_paths));
  rep.line("excluded_paths", std::to_string(cr.excluded));
  rep.line("T_burn_in", cr.burn_in.str());
  rep.line("T_excited", cr.excited.str());
  rep.line("interval", cr.interval_empty ? std::string("empty") : fmt::format("[{}, {}]", cr.first, cr.last));
  rep.line("num_covered", std::to_string(cr.num_covered));
  rep.line("empirical_rate", cr.empirical_rate);
  rep.line("wilson_lower_95", cr.wilson_lower_95);
  rep.line("target", cr.target);
  rep.line("worst_error_to_bound_ratio", cr.worst_ratio);
  if (cr.extended_evaluated) {
    rep.line("extended_rate", cr.extended_rate);
    rep.line("extended_wilson_lower_95", cr.extended_wilson_lower_95);
  }
  rep.check("coverage", cr.pass, cr.interval_empty ? "interval empty, reported not failed" : "Wilson lower >= target - 0.02");
  io::write_file_atomic(l.out / "coverage_report.txt", rep.str());
  std::cout << rep.str();
  return cr.pass ? kOk : kFailedCheck;
}

int cmd_example1(const Common& c) {
  Loaded l = load(c);
  const Example1Result res = reproduce_example1(l.cfg, l.out);
  std::cout << res.report;
  return res.all_pass() ? kOk : kFailedCheck;
}

int cmd_example2(const Common& c) {
  Loaded l = load(c);
  const Example2Result res = reproduce_example2(l.cfg, l.out);
  std::cout << res.report;
  return res.all_pass() ? kOk : kFailedCheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop identification toolkit: simulation, bounds, excitation checks and experiments"};
  app.require_subcommand(1);
  Common common;
  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(const Common&);
  };
  const Cmd cmds[] = {
      {"simulate", "simulate one closed-loop path and write run.csv", cmd_simulate},
      {"bounds", "compute the bound profile and write bounds.csv", cmd_bounds},
      {"excitation", "check the excitation certificate by Monte Carlo", cmd_excitation},
      {"coverage", "Monte Carlo coverage of the error bound", cmd_coverage},
      {"reproduce-example1", "PWA system: times, mean error curves and plot", cmd_example1},
      {"reproduce-example2", "double integrator: certificate, rate, coverage", cmd_example2},
  };
  int (*chosen)(const Common&) = nullptr;
  for (const Cmd& cmd : cmds) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", common.config, "YAML config file")->required();
    sub->add_option("--out", common.out, "output directory (default: run.out, then $SYSID_OUT_DIR, then ./results)");
    sub->add_option("--seed", common.seed, "master seed override");
    sub->callback([&chosen, fn = cmd.fn] { chosen = fn; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadInput;
  }
  try {
    return chosen(common);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const YAML::Exception& e) {
    std::cerr << "error: config: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kBadInput;
}
