#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sysid/growth.hpp"
#include "sysid/noise.hpp"
#include "sysid/region.hpp"
#include "sysid/types.hpp"

namespace sysid {

// Comparison functions bounding the deterministic trajectory:
//   |phi(t, xi, u, w)| <= chi1(t) + chi2(|xi|) + chi3(sum sigma1(|u|))
//                        + chi4(sum sigma2(|w|)) + c1,
// and |psi(x, u)| <= chi5(|[x; u]|).
struct GrowthCertificate {
  GrowthFn chi1, chi2, chi3, chi4, chi5, sigma1, sigma2;
  double c1 = 0.0;

  // Class requirements of the sub-exponential input-to-state bound.
  void validate() const {
    auto need = [](const GrowthFn& g, const char* name, bool se1, bool se2) {
      ClassFlags f = g.classify();
      if (!f.is_Kinf) throw std::invalid_argument(std::string("growth: ") + name + " must be class K-infinity");
      if (se1 && !f.is_1SE) throw std::invalid_argument(std::string("growth: ") + name + " must be 1-SE");
      if (se2 && !f.is_2SE) throw std::invalid_argument(std::string("growth: ") + name + " must be 2-SE");
    };
    need(chi1, "chi1", true, false);
    need(chi3, "chi3", true, false);
    need(sigma2, "sigma2", true, false);
    need(chi4, "chi4", false, true);
    need(chi2, "chi2", false, false);
    need(sigma1, "sigma1", false, false);
    if (!chi5.classify().is_APB) throw std::invalid_argument("growth: chi5 must be APB");
    if (!(c1 >= 0.0) || !std::isfinite(c1)) throw std::invalid_argument("growth: c1 must be finite and >= 0");
  }

  // Polynomial input-to-state bound: chi1, chi3, chi4, sigma2 all APB.
  bool polynomial() const {
    return chi1.classify().is_APB && chi3.classify().is_APB && chi4.classify().is_APB &&
           sigma2.classify().is_APB;
  }

  bool all_verified() const {
    for (const GrowthFn* g : {&chi1, &chi2, &chi3, &chi4, &chi5, &sigma1, &sigma2})
      if (!g->classify().verified) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Built-in system families

// f = 1, psi = [x, 1{x <= threshold} u], alpha = s with s ~ Uniform[-ubar, ubar].
struct PwaFamily {
  double threshold = 3500.0;
  double ubar = 1.0;
};

enum class InnerPolicy { kZero, kSaturatedFeedback, kPushAway };

// x+ = [[1,0],[1,1]] x + [1,0]^T u + w written as f = 0,
// psi = [x1, x2, u], alpha = alpha2(x, theta) + s.
struct DoubleIntegratorFamily {
  double ubar1 = 0.5;
  double ubar2 = 1.0;
  InnerPolicy inner = InnerPolicy::kSaturatedFeedback;
  double projection_radius = 10.0;
};

// Monomial over v = [x; u]: coeff * prod v_k^{powers_k}, optionally gated by
// 1{v[gate_var] <= gate_threshold}.
struct PolyTerm {
  int output = 0;
  double coeff = 0.0;
  std::vector<int> powers;
  int gate_var = -1;
  double gate_threshold = 0.0;
};

// f and psi as sums of gated monomials; alpha = clip(K x, feedback_limit) + s.
struct GenericFamily {
  std::vector<PolyTerm> f_terms;
  std::vector<PolyTerm> psi_terms;
  Mat feedback_gain;  // m x n
  double feedback_limit = 0.0;
};

// Hand-assembled systems (tests, library users). No closed-form reachable set.
struct CustomFamily {};

using Family = std::variant<PwaFamily, DoubleIntegratorFamily, GenericFamily, CustomFamily>;

// Full closed-loop identification problem:
//   X(t+1) = f(X, U) + theta_star^T psi(X, U) + W(t+1),  U(t) = alpha(X(t), S(t), theta_hat(t-1)).
struct SystemSpec {
  std::string name;
  int n = 1, m = 1, d = 1, q = 1;
  std::function<Vec(const Vec&, const Vec&)> f;
  std::function<Vec(const Vec&, const Vec&)> psi;
  std::function<Vec(const Vec&, const Vec&, const Mat&)> alpha;
  Mat theta_star;
  double u_max = 0.0;
  NoiseModel process_noise;
  NoiseModel exploratory_noise;
  double gamma = 1e-4;
  Mat vartheta0;
  GrowthCertificate growth;
  Region state_space = Region::all();
  Family family = CustomFamily{};

  // Sub-Gaussian proxy of the process noise, as used by wbar and the error bound.
  double sigma_w() const { return std::sqrt(process_noise.variance_proxy()); }

  // g(x, u, w)
  Vec step(const Vec& x, const Vec& u, const Vec& w) const {
    return f(x, u) + theta_star.transpose() * psi(x, u) + w;
  }

  void validate() const {
    if (n < 1 || m < 1 || d < 1 || q < 1) throw std::invalid_argument("system: dimensions must be positive");
    if (!f || !psi || !alpha) throw std::invalid_argument("system: f, psi and alpha must be set");
    if (theta_star.rows() != d || theta_star.cols() != n)
      throw std::invalid_argument("system: theta_star must be d x n");
    if (vartheta0.rows() != d || vartheta0.cols() != n)
      throw std::invalid_argument("system: vartheta0 must be d x n");
    if (!(gamma > 0.0)) throw std::invalid_argument("system: gamma must be > 0");
    if (!(u_max >= 0.0) || !std::isfinite(u_max)) throw std::invalid_argument("system: u_max must be finite and >= 0");
    if (process_noise.dim() != n) throw std::invalid_argument("system: process noise dim must equal n");
    if (exploratory_noise.dim() != q) throw std::invalid_argument("system: exploratory noise dim must equal q");
    growth.validate();
  }
};

namespace detail {

inline double clip_norm_scalar(double v, double limit) { return std::clamp(v, -limit, limit); }

inline Vec clip_norm(const Vec& v, double limit) {
  const double nv = v.norm();
  if (nv <= limit || nv == 0.0) return v;
  return v * (limit / nv);
}

// Frobenius-ball projection onto {theta : |theta|_F <= radius}.
inline Mat project_frobenius(const Mat& theta, double radius) {
  const double nf = theta.norm();
  if (nf <= radius || nf == 0.0) return theta;
  return theta * (radius / nf);
}

// Infinite-horizon LQR gain for the estimated double integrator (Q = I, R = 1),
// by value iteration. Returns zero when the iteration does not settle to a
// finite value.
inline Eigen::RowVector2d lqr_gain(const Eigen::Matrix2d& a, const Eigen::Vector2d& b) {
  Eigen::Matrix2d p = Eigen::Matrix2d::Identity();
  Eigen::RowVector2d k = Eigen::RowVector2d::Zero();
  for (int it = 0; it < 200; ++it) {
    const double s = 1.0 + b.dot(p * b);
    k = (b.transpose() * p * a) / s;
    Eigen::Matrix2d next = Eigen::Matrix2d::Identity() + a.transpose() * p * a - a.transpose() * p * b * k;
    next = 0.5 * (next + next.transpose());
    if (!next.allFinite() || next.norm() > 1e12) return Eigen::RowVector2d::Zero();
    const double change = (next - p).norm();
    p = next;
    if (change < 1e-10 * (1.0 + p.norm())) break;
  }
  const double s = 1.0 + b.dot(p * b);
  k = (b.transpose() * p * a) / s;
  return k.allFinite() ? k : Eigen::RowVector2d::Zero();
}

inline double poly_term_value(const PolyTerm& t, const Vec& v) {
  if (t.gate_var >= 0 && !(v[t.gate_var] <= t.gate_threshold)) return 0.0;
  double val = t.coeff;
  for (std::size_t k = 0; k < t.powers.size(); ++k)
    if (t.powers[k] != 0) val *= std::pow(v[static_cast<Index>(k)], t.powers[k]);
  return val;
}

inline Vec eval_poly(const std::vector<PolyTerm>& terms, int outputs, const Vec& x, const Vec& u) {
  Vec v(x.size() + u.size());
  v << x, u;
  Vec out = Vec::Zero(outputs);
  for (const auto& t : terms) out[t.output] += poly_term_value(t, v);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Factories

struct PwaOptions {
  double threshold = 3500.0;  // +inf allowed
  double ubar = 1.0;
  double sigma_w = 0.31622776601683794;  // sqrt(0.1)
  double gamma = 1e-4;
  Mat theta_star = (Mat(2, 1) << 1.0, 0.1).finished();
};

inline SystemSpec make_pwa_system(const PwaOptions& o = {}) {
  if (!(o.ubar > 0.0)) throw std::invalid_argument("pwa: ubar must be > 0");
  if (std::isnan(o.threshold)) throw std::invalid_argument("pwa: threshold is NaN");
  SystemSpec s;
  s.name = "pwa";
  s.n = 1;
  s.m = 1;
  s.d = 2;
  s.q = 1;
  const double thr = o.threshold;
  s.f = [](const Vec&, const Vec&) { return Vec::Constant(1, 1.0); };
  s.psi = [thr](const Vec& x, const Vec& u) {
    Vec z(2);
    z << x[0], (x[0] <= thr ? u[0] : 0.0);
    return z;
  };
  s.alpha = [](const Vec&, const Vec& sv, const Mat&) { return Vec(sv); };
  s.theta_star = o.theta_star;
  s.u_max = o.ubar;
  s.process_noise = NoiseModel::gaussian(o.sigma_w, 1);
  s.exploratory_noise = NoiseModel::uniform(o.ubar, 1);
  s.gamma = o.gamma;
  s.vartheta0 = Mat::Zero(2, 1);
  // |phi(t)| <= t + |xi| + |theta2| sum |u| + sum |w| for f = 1, theta1 = 1.
  const GrowthFn id = GrowthFn::identity();
  s.growth = {id, id, scale(id, std::abs(o.theta_star(1, 0))), id, id, id, id, 0.0};
  s.family = PwaFamily{thr, o.ubar};
  return s;
}

struct DoubleIntegratorOptions {
  double sigma_w = 1.0;
  double ubar1 = 0.5;
  double ubar2 = 1.0;
  double gamma = 1e-4;
  InnerPolicy inner = InnerPolicy::kSaturatedFeedback;
  double projection_radius = 10.0;
  // Replaces the built-in inner policy when set; output is clipped to ubar1.
  std::function<double(const Vec&, const Mat&)> custom_inner;
};

inline SystemSpec make_double_integrator(const DoubleIntegratorOptions& o = {}) {
  if (!(o.ubar2 > 0.0) || !(o.ubar1 >= 0.0)) throw std::invalid_argument("double integrator: bad control bounds");
  SystemSpec s;
  s.name = "double_integrator";
  s.n = 2;
  s.m = 1;
  s.d = 3;
  s.q = 1;
  s.f = [](const Vec&, const Vec&) { return Vec::Zero(2); };
  s.psi = [](const Vec& x, const Vec& u) {
    Vec z(3);
    z << x[0], x[1], u[0];
    return z;
  };
  const double ubar1 = o.ubar1;
  const double radius = o.projection_radius;
  std::function<double(const Vec&, const Mat&)> inner;
  if (o.custom_inner) {
    inner = o.custom_inner;
  } else {
    switch (o.inner) {
      case InnerPolicy::kZero:
        inner = [](const Vec&, const Mat&) { return 0.0; };
        break;
      case InnerPolicy::kSaturatedFeedback:
        inner = [radius](const Vec& x, const Mat& theta) {
          // Monte Carlo checks call this many times with the same theta.
          thread_local Mat last_theta;
          thread_local double last_radius = -1.0;
          thread_local Eigen::RowVector2d last_k;
          if (last_radius != radius || last_theta.rows() != theta.rows() || last_theta.cols() != theta.cols() ||
              last_theta != theta) {
            const Mat th = detail::project_frobenius(theta, radius);
            Eigen::Matrix2d a = th.topRows(2).transpose();
            Eigen::Vector2d b = th.row(2).transpose();
            last_k = detail::lqr_gain(a, b);
            last_theta = theta;
            last_radius = radius;
          }
          return -(last_k * Eigen::Vector2d(x[0], x[1]))(0);
        };
        break;
      case InnerPolicy::kPushAway:
        // Deliberately destabilising: push along the sign of x1 + x2.
        inner = [ubar1](const Vec& x, const Mat&) { return (x[0] + x[1] >= 0.0) ? ubar1 : -ubar1; };
        break;
    }
  }
  s.alpha = [inner, ubar1](const Vec& x, const Vec& sv, const Mat& theta) {
    double a2 = inner(x, theta);
    if (!std::isfinite(a2)) a2 = 0.0;
    return Vec::Constant(1, detail::clip_norm_scalar(a2, ubar1) + sv[0]);
  };
  s.theta_star = (Mat(3, 2) << 1, 1, 0, 1, 1, 0).finished();
  s.u_max = o.ubar1 + o.ubar2;
  s.process_noise = NoiseModel::gaussian(o.sigma_w, 2);
  s.exploratory_noise = NoiseModel::uniform(o.ubar2, 1);
  s.gamma = o.gamma;
  s.vartheta0 = Mat::Zero(3, 2);
  const GrowthFn five_sq = GrowthFn::power(5.0, 2.0);
  const GrowthFn half_five_sq = GrowthFn::power(2.5, 2.0);
  const GrowthFn id = GrowthFn::identity();
  s.growth = {five_sq, half_five_sq, half_five_sq, five_sq, id, id, id, 2.5};
  s.family = DoubleIntegratorFamily{o.ubar1, o.ubar2, o.inner, o.projection_radius};
  return s;
}

struct GenericOptions {
  int n = 1, m = 1, d = 1;
  std::vector<PolyTerm> f_terms;
  std::vector<PolyTerm> psi_terms;
  Mat feedback_gain;  // m x n; empty means zero
  double feedback_limit = 0.0;
  double dither = 1.0;  // uniform half-width per control coordinate
  double sigma_w = 1.0;
  double gamma = 1e-4;
  Mat theta_star;
  GrowthCertificate growth;
};

inline SystemSpec make_generic_system(const GenericOptions& o) {
  SystemSpec s;
  s.name = "generic";
  s.n = o.n;
  s.m = o.m;
  s.d = o.d;
  s.q = o.m;
  const int nv = o.n + o.m;
  auto check_terms = [nv](const std::vector<PolyTerm>& ts, int outputs) {
    for (const auto& t : ts) {
      if (t.output < 0 || t.output >= outputs) throw std::invalid_argument("generic: term output out of range");
      if (static_cast<int>(t.powers.size()) != nv) throw std::invalid_argument("generic: powers must have n+m entries");
      for (int p : t.powers)
        if (p < 0) throw std::invalid_argument("generic: negative power");
      if (t.gate_var >= nv) throw std::invalid_argument("generic: gate variable out of range");
    }
  };
  check_terms(o.f_terms, o.n);
  check_terms(o.psi_terms, o.d);
  Mat gain = o.feedback_gain.size() == 0 ? Mat::Zero(o.m, o.n) : o.feedback_gain;
  if (gain.rows() != o.m || gain.cols() != o.n) throw std::invalid_argument("generic: feedback gain must be m x n");
  if (!(o.dither >= 0.0) || !(o.feedback_limit >= 0.0)) throw std::invalid_argument("generic: bad control bounds");
  const auto f_terms = o.f_terms;
  const auto psi_terms = o.psi_terms;
  const int n = o.n, d = o.d;
  s.f = [f_terms, n](const Vec& x, const Vec& u) { return detail::eval_poly(f_terms, n, x, u); };
  s.psi = [psi_terms, d](const Vec& x, const Vec& u) { return detail::eval_poly(psi_terms, d, x, u); };
  const double lim = o.feedback_limit;
  s.alpha = [gain, lim](const Vec& x, const Vec& sv, const Mat&) -> Vec {
    return detail::clip_norm(gain * x, lim) + sv;
  };
  s.theta_star = o.theta_star;
  s.u_max = o.feedback_limit + o.dither * std::sqrt(static_cast<double>(o.m));
  s.process_noise = NoiseModel::gaussian(o.sigma_w, o.n);
  s.exploratory_noise = NoiseModel::uniform(o.dither, o.m);
  s.gamma = o.gamma;
  s.vartheta0 = Mat::Zero(o.d, o.n);
  s.growth = o.growth;
  s.family = GenericFamily{o.f_terms, o.psi_terms, gain, o.feedback_limit};
  return s;
}

}  // namespace sysid
