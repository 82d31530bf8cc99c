#pragma once

#include <complex>

#include <Eigen/Dense>

namespace qjump {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

// Conditional norm may exceed its previous value by at most this relative slack.
inline constexpr double kNormSlack = 1e-9;
// Relative time accuracy of the jump-time root search.
inline constexpr double kJumpTimeTol = 1e-10;

}  // namespace qjump
