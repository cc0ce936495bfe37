#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace deepboot {

/// Rows of `x` are observations; `y` holds the matching responses (class
/// labels in {-1, +1} for classification).
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;

  std::size_t size() const { return static_cast<std::size_t>(y.size()); }
  std::size_t dim() const { return static_cast<std::size_t>(x.cols()); }
};

/// Observed rows followed by pseudo rows.
Dataset concat(const Dataset& a, const Dataset& b);

/// Linear-model parameter: intercept beta and coefficients theta.
struct Parameter {
  double intercept = 0.0;
  Eigen::VectorXd coefs;

  static Parameter zero(std::size_t p) { return {0.0, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p))}; }

  std::size_t dim() const { return static_cast<std::size_t>(coefs.size()); }

  /// (beta, theta_1, ..., theta_p)
  Eigen::VectorXd full() const;
  static Parameter from_full(const Eigen::Ref<const Eigen::VectorXd>& v);
};

}  // namespace deepboot
