#pragma once

#include <Eigen/Dense>

#include <string>

namespace deepboot {

enum class Method { DBS, WLB, MCMC };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

/// N posterior draws, one per row laid out as (beta, theta_1, ..., theta_p).
/// Models without an intercept carry beta = 0.
struct SampleBatch {
  Eigen::MatrixXd draws;
  Method method = Method::DBS;
  double train_seconds = 0.0;   // DBS training; 0 for the other methods
  double sample_seconds = 0.0;  // sampling (DBS), total optimization (WLB), chain time (MCMC)

  std::size_t size() const { return static_cast<std::size_t>(draws.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(draws.cols()); }
};

}  // namespace deepboot
