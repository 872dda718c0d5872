#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "sysid/linalg.hpp"
#include "sysid/types.hpp"

namespace sysid {

// Regularised least squares
//   theta_hat(t) = argmin sum_s |y(s) - theta^T z(s)|^2 + gamma |theta|_F^2
//               = G(t)^{-1} sum_s z(s) y(s)^T,  G(t) = sum_s z(s) z(s)^T + gamma I,
// with theta_hat = vartheta0 before any data.
//
// G^{-1} is maintained by Sherman-Morrison rank-1 updates and rebuilt from G
// every `refactor_interval` updates to stop round-off drift on long runs.
class RecursiveLeastSquares {
 public:
  RecursiveLeastSquares(int d, int n, double gamma, Mat vartheta0, int refactor_interval = 512)
      : d_(d), n_(n), gamma_(gamma), refactor_interval_(refactor_interval), estimate_(std::move(vartheta0)) {
    if (d < 1 || n < 1) throw std::invalid_argument("RLS: dimensions must be positive");
    if (!(gamma > 0.0)) throw std::invalid_argument("RLS: gamma must be > 0");
    if (estimate_.rows() != d || estimate_.cols() != n)
      throw std::invalid_argument("RLS: vartheta0 must be d x n");
    if (refactor_interval_ < 1) throw std::invalid_argument("RLS: refactor interval must be >= 1");
    gram_ = gamma_ * Mat::Identity(d, d);
    gram_inv_ = (1.0 / gamma_) * Mat::Identity(d, d);
    cross_ = Mat::Zero(d, n);
  }

  // Adds regressor z(t) with target y(t) = X(t) - f(X(t-1), U(t-1)).
  void update(const Vec& z, const Vec& y) {
    if (z.size() != d_ || y.size() != n_) throw std::invalid_argument("RLS::update: dimension mismatch");
    gram_.noalias() += z * z.transpose();
    cross_.noalias() += z * y.transpose();
    ++count_;
    if (count_ % refactor_interval_ == 0) {
      refactor();
    } else {
      const Vec pz = gram_inv_ * z;
      const double denom = 1.0 + z.dot(pz);
      gram_inv_.noalias() -= (pz * pz.transpose()) / denom;
    }
    estimate_.noalias() = gram_inv_ * cross_;
  }

  const Mat& estimate() const { return estimate_; }
  const Mat& gramian() const { return gram_; }
  const Mat& gramian_inverse() const { return gram_inv_; }
  Index count() const { return count_; }
  double gamma() const { return gamma_; }

  EigenExtremes extremes() const { return gram_extremes(gram_); }

 private:
  void refactor() {
    gram_inv_ = gram_.ldlt().solve(Mat::Identity(d_, d_));
    gram_inv_ = 0.5 * (gram_inv_ + gram_inv_.transpose()).eval();
  }

  int d_;
  int n_;
  double gamma_;
  int refactor_interval_;
  Index count_ = 0;
  Mat gram_;
  Mat gram_inv_;
  Mat cross_;
  Mat estimate_;
};

// Direct minimiser of the regularised objective, assembled and solved from
// scratch. Used as the oracle for RecursiveLeastSquares.
inline Mat rls_direct(std::span<const Vec> regressors, std::span<const Vec> targets, double gamma,
                      const Mat& vartheta0) {
  if (regressors.size() != targets.size()) throw std::invalid_argument("rls_direct: length mismatch");
  if (!(gamma > 0.0)) throw std::invalid_argument("rls_direct: gamma must be > 0");
  if (regressors.empty()) return vartheta0;
  const Index d = vartheta0.rows(), n = vartheta0.cols();
  Mat g = gamma * Mat::Identity(d, d);
  Mat rhs = Mat::Zero(d, n);
  for (std::size_t i = 0; i < regressors.size(); ++i) {
    if (regressors[i].size() != d || targets[i].size() != n)
      throw std::invalid_argument("rls_direct: dimension mismatch");
    g.noalias() += regressors[i] * regressors[i].transpose();
    rhs.noalias() += regressors[i] * targets[i].transpose();
  }
  return g.colPivHouseholderQr().solve(rhs);
}

}  // namespace sysid
