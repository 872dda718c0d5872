#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>

namespace sysid {

inline constexpr double kZ95 = 1.959963984540054;

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

// Wilson score interval for a binomial proportion.
inline Interval wilson_interval(std::int64_t successes, std::int64_t trials, double z = kZ95) {
  if (trials <= 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

// Welford accumulator that also tracks the fourth central moment, for a CLT
// standard error on the sample variance.
class RunningMoments {
 public:
  void push(double x) {
    const double n1 = static_cast<double>(n_);
    ++n_;
    const double n = static_cast<double>(n_);
    const double delta = x - mean_;
    const double delta_n = delta / n;
    const double delta_n2 = delta_n * delta_n;
    const double term1 = delta * delta_n * n1;
    mean_ += delta_n;
    m4_ += term1 * delta_n2 * (n * n - 3 * n + 3) + 6 * delta_n2 * m2_ - 4 * delta_n * m3_;
    m3_ += term1 * delta_n * (n - 2) - 3 * delta_n * m2_;
    m2_ += term1;
  }

  std::int64_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double population_variance() const { return n_ > 0 ? m2_ / static_cast<double>(n_) : 0.0; }

  double mean_stderr() const { return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

  // Asymptotic standard error of the sample variance: sqrt((mu4 - sigma^4)/n).
  double variance_stderr() const {
    if (n_ < 2) return 0.0;
    const double n = static_cast<double>(n_);
    const double mu4 = m4_ / n;
    const double s2 = population_variance();
    return std::sqrt(std::max(mu4 - s2 * s2, 0.0) / n);
  }

 private:
  std::int64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double m3_ = 0.0;
  double m4_ = 0.0;
};

}  // namespace sysid
