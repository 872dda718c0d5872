#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "sysid/types.hpp"

namespace sysid {

struct EigenExtremes {
  double min_eig = 0.0;
  double max_eig = 0.0;
};

// Extreme eigenvalues of a symmetric matrix. d is small in every use here, so
// a full decomposition is fine.
inline EigenExtremes gram_extremes(const Mat& gram) {
  if (gram.rows() != gram.cols() || gram.rows() == 0)
    throw std::invalid_argument("gram_extremes: matrix must be square and non-empty");
  if (gram.rows() == 1) return {gram(0, 0), gram(0, 0)};
  if (gram.rows() == 2) {
    // Closed form avoids the iterative solver in the simulation hot loop.
    const double a = gram(0, 0), b = 0.5 * (gram(0, 1) + gram(1, 0)), c = gram(1, 1);
    const double mid = 0.5 * (a + c);
    const double rad = std::hypot(0.5 * (a - c), b);
    const double hi = mid + rad;
    // lo from the determinant keeps relative accuracy when hi >> lo.
    const double det = a * c - b * b;
    const double lo = hi > 0.0 ? det / hi : mid - rad;
    return {lo, hi};
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(gram, Eigen::EigenvaluesOnly);
  return {es.eigenvalues()(0), es.eigenvalues()(gram.rows() - 1)};
}

// Induced 2-norm (largest singular value) of theta_hat - theta_star.
inline double spectral_error(const Mat& theta_hat, const Mat& theta_star) {
  if (theta_hat.rows() != theta_star.rows() || theta_hat.cols() != theta_star.cols())
    throw std::invalid_argument("spectral_error: shape mismatch");
  const Mat diff = theta_hat - theta_star;
  if (diff.size() == 0) return 0.0;
  if (diff.cols() == 1) return diff.norm();
  if (diff.rows() == 1) return diff.norm();
  Eigen::JacobiSVD<Mat> svd(diff);
  return svd.singularValues()(0);
}

}  // namespace sysid
