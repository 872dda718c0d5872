#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace sysid {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = std::int64_t;

}  // namespace sysid
