#pragma once

#include <cmath>
#include <numbers>

namespace sysid {

// Standard normal pdf and cdf. erfc keeps full relative accuracy in the lower tail.
inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace sysid
