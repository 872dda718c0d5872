#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sysid/estimator.hpp"
#include "sysid/linalg.hpp"
#include "sysid/rng.hpp"
#include "sysid/system.hpp"

namespace sysid {

// One closed-loop trajectory with the estimator state along it.
// Index conventions: states[t] = X(t) for t = 0..T; controls[t] = U(t) for
// t = 0..T-1; noise[t-1] = W(t), regressors[t-1] = Z(t), estimates[t-1] =
// theta_hat(t) and the eigen/error sequences likewise for t = 1..T.
struct EstimationRun {
  std::vector<Vec> states;
  std::vector<Vec> controls;
  std::vector<Vec> noise;
  std::vector<Vec> regressors;
  std::vector<Mat> estimates;
  std::vector<double> gram_min_eig;
  std::vector<double> gram_max_eig;
  std::vector<double> errors;

  Index steps() const { return static_cast<Index>(controls.size()); }
};

class SimulationDiverged : public std::runtime_error {
 public:
  SimulationDiverged(Index step, EstimationRun run)
      : std::runtime_error("simulation diverged at step " + std::to_string(step)), step_(step), run_(std::move(run)) {}
  Index step() const { return step_; }
  const EstimationRun& truncated_run() const { return run_; }

 private:
  Index step_;
  EstimationRun run_;
};

struct SimulateOptions {
  bool record_estimates = true;
  int refactor_interval = 512;
  double overflow_limit = 1e150;
  // Numerical slack on the control constraint check; built-in families are exact.
  double control_tolerance = 1e-12;
};

// Simulates the closed loop from x0 for T steps with trajectory stream
// `path` of master seed `seed`. Per step: S(t) is drawn, then W(t+1).
inline EstimationRun simulate(const SystemSpec& spec, const Vec& x0, Index horizon, std::uint64_t seed,
                              std::uint64_t path = 0, const SimulateOptions& opt = {}) {
  if (horizon < 1) throw std::invalid_argument("simulate: T must be >= 1");
  if (x0.size() != spec.n) throw std::invalid_argument("simulate: x0 has wrong dimension");
  if (!spec.state_space.contains(x0)) throw std::invalid_argument("simulate: x0 outside the state space");
  RngStream rng = make_stream(seed, path);
  RecursiveLeastSquares rls(spec.d, spec.n, spec.gamma, spec.vartheta0, opt.refactor_interval);

  EstimationRun run;
  const auto reserve = static_cast<std::size_t>(horizon);
  run.states.reserve(reserve + 1);
  run.controls.reserve(reserve);
  run.noise.reserve(reserve);
  run.regressors.reserve(reserve);
  if (opt.record_estimates) run.estimates.reserve(reserve);
  run.gram_min_eig.reserve(reserve);
  run.gram_max_eig.reserve(reserve);
  run.errors.reserve(reserve);
  run.states.push_back(x0);

  Mat lagged = spec.vartheta0;  // theta_hat(t-1)
  Vec x = x0;
  for (Index t = 0; t < horizon; ++t) {
    const Vec s = spec.exploratory_noise.sample(rng);
    const Vec u = spec.alpha(x, s, lagged);
    if (u.size() != spec.m) throw std::logic_error("simulate: alpha returned wrong dimension");
    if (u.norm() > spec.u_max * (1.0 + opt.control_tolerance) + opt.control_tolerance)
      throw std::logic_error("simulate: control exceeds u_max");
    const Vec w = spec.process_noise.sample(rng);
    const Vec fx = spec.f(x, u);
    const Vec z = spec.psi(x, u);
    Vec xn = fx + spec.theta_star.transpose() * z + w;

    run.controls.push_back(u);
    run.noise.push_back(w);
    if (!xn.allFinite() || xn.norm() > opt.overflow_limit) {
      run.states.push_back(xn);
      throw SimulationDiverged(t + 1, std::move(run));
    }
    lagged = rls.estimate();
    rls.update(z, xn - fx);
    const EigenExtremes ext = rls.extremes();
    run.regressors.push_back(z);
    if (opt.record_estimates) run.estimates.push_back(rls.estimate());
    run.gram_min_eig.push_back(ext.min_eig);
    run.gram_max_eig.push_back(ext.max_eig);
    run.errors.push_back(spectral_error(rls.estimate(), spec.theta_star));
    run.states.push_back(xn);
    x = std::move(xn);
  }
  return run;
}

}  // namespace sysid
