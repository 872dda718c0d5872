#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "sysid/rng.hpp"
#include "sysid/types.hpp"

namespace sysid {

enum class NoiseKind { kGaussianIso, kUniformBox };

// Zero-mean i.i.d. noise with a sub-Gaussian variance proxy.
//
// Gaussian: N(0, sigma^2 I), proxy sigma^2. Uniform: each coordinate on
// [-b, b], proxy b^2 (valid for any zero-mean variable supported on [-b, b]).
// A scale of zero gives the degenerate all-zeros model used to switch a noise
// source off.
class NoiseModel {
 public:
  NoiseModel() = default;

  static NoiseModel gaussian(double sigma, int dim) { return NoiseModel(NoiseKind::kGaussianIso, sigma, dim); }
  static NoiseModel uniform(double half_width, int dim) {
    return NoiseModel(NoiseKind::kUniformBox, half_width, dim);
  }
  static NoiseModel zero(int dim) { return NoiseModel(NoiseKind::kGaussianIso, 0.0, dim); }

  NoiseKind kind() const { return kind_; }
  double scale() const { return scale_; }
  int dim() const { return dim_; }

  double variance_proxy() const { return scale_ * scale_; }

  // Per-coordinate variance of the actual distribution.
  double variance() const {
    return kind_ == NoiseKind::kGaussianIso ? scale_ * scale_ : scale_ * scale_ / 3.0;
  }

  // Largest |v| over the support, +inf for Gaussian.
  double max_norm() const {
    if (scale_ == 0.0) return 0.0;
    return kind_ == NoiseKind::kUniformBox ? scale_ * std::sqrt(static_cast<double>(dim_))
                                           : std::numeric_limits<double>::infinity();
  }

  Vec sample(RngStream& rng) const {
    Vec v(dim_);
    if (scale_ == 0.0) {
      v.setZero();
      return v;
    }
    if (kind_ == NoiseKind::kGaussianIso) {
      std::normal_distribution<double> nd(0.0, scale_);
      for (int i = 0; i < dim_; ++i) v[i] = nd(rng);
    } else {
      std::uniform_real_distribution<double> ud(-scale_, scale_);
      for (int i = 0; i < dim_; ++i) v[i] = ud(rng);
    }
    return v;
  }

  std::string kind_name() const { return kind_ == NoiseKind::kGaussianIso ? "gaussian" : "uniform"; }

 private:
  NoiseModel(NoiseKind k, double s, int d) : kind_(k), scale_(s), dim_(d) {
    if (!std::isfinite(s) || s < 0.0) throw std::invalid_argument("NoiseModel: scale must be finite and >= 0");
    if (d < 1) throw std::invalid_argument("NoiseModel: dim must be >= 1");
  }

  NoiseKind kind_ = NoiseKind::kGaussianIso;
  double scale_ = 0.0;
  int dim_ = 1;
};

// Uniform-in-time high-probability bound on |W(t)|:
//   sigma_w * sqrt(2 n ln(n pi^2 t^2 / (3 delta)))   for t >= 1,  0 at t = 0.
// With probability >= 1 - delta, |W(t)| <= wbar(t) for every t >= 1.
// The closed form is evaluated as written even where the log argument drops
// below one (delta > n pi^2 / 3 is outside the contract and rejected).
inline double noise_bound_wbar_unchecked(Index t, double delta, double sigma_w, int n) {
  if (t == 0) return 0.0;
  const double td = static_cast<double>(t);
  const double arg = n * std::numbers::pi * std::numbers::pi * td * td / (3.0 * delta);
  const double l = std::log(arg);
  return sigma_w * std::sqrt(2.0 * n * std::max(l, 0.0));
}

inline double noise_bound_wbar(Index t, double delta, double sigma_w, int n) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::domain_error("delta must be in (0,1)");
  if (t < 0) throw std::domain_error("wbar: t must be >= 0");
  if (n < 1) throw std::domain_error("wbar: n must be >= 1");
  if (!(sigma_w >= 0.0)) throw std::domain_error("wbar: sigma_w must be >= 0");
  return noise_bound_wbar_unchecked(t, delta, sigma_w, n);
}

}  // namespace sysid
