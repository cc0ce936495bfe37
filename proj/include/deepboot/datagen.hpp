#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>

#include "deepboot/dataset.hpp"
#include "deepboot/losses.hpp"
#include "deepboot/rng.hpp"

namespace deepboot {

/// Sigma = I + rho (J - I).
Eigen::MatrixXd equicorrelation(std::size_t p, double rho);
/// Sigma_ij = r^|i - j|.
Eigen::MatrixXd toeplitz(std::size_t p, double r);

/// Zero-mean multivariate normal rows via the lower Cholesky factor of `cov`.
class GaussianSampler {
 public:
  explicit GaussianSampler(const Eigen::MatrixXd& cov);
  Eigen::VectorXd draw(Rng& rng) const;
  const Eigen::MatrixXd& factor() const { return chol_; }

 private:
  Eigen::MatrixXd chol_;
};

// ---------------------------------------------------------------- SVM

/// y = +-1 with probability 1/2, then x | y ~ N(signal * y * 1_p, Sigma) with
/// equicorrelated Sigma.
struct SvmDesign {
  std::size_t n = 50;
  std::size_t p = 10;
  double rho = 0.6;
  double signal = 1.0;
  std::size_t test_size = 100;
  std::uint64_t seed = 0;
};

struct SvmData {
  Dataset train;
  Dataset test;
};

SvmData gen_svm(const SvmDesign& design);

/// `count` fresh draws from the SVM design law, using `rng`.
Dataset draw_svm(const SvmDesign& design, std::size_t count, Rng& rng);

/// NPL prior centering measure for the SVM: x from the empirical distribution
/// of the observed covariates, y ~ Bernoulli(1/2) on {-1, +1}, independently.
Dataset svm_prior_pseudo(const Dataset& observed, std::size_t count, Rng& rng);

// ---------------------------------------------------------------- LAD

enum class LadModel { M1_large_outliers, M2_laplace };

std::string to_string(LadModel m);
LadModel lad_model_from_string(const std::string& s);

/// y = beta* + x.theta* + sigma * eps, x ~ N(0, Toeplitz 0.5^|i-j|),
/// beta* = 1, theta* = (1.5, 2, 3, 0, ..., 0), sigma = 9.67, eps unit variance:
///   Model 1: eps = v / sqrt(23.4), v ~ 0.9 N(0, 1) + 0.1 N(0, 225)
///   Model 2: eps = v / sqrt(2),    v ~ Laplace(1)
struct LadDesign {
  std::size_t n = 100;
  std::size_t p = 8;
  LadModel model = LadModel::M2_laplace;
  std::uint64_t seed = 0;

  static constexpr double kIntercept = 1.0;
  static constexpr double kSigma = 9.67;
  static constexpr std::size_t kActive = 3;
};

Parameter lad_truth(std::size_t p);
Dataset gen_lad(const LadDesign& design);
Dataset draw_lad(const LadDesign& design, std::size_t count, Rng& rng);
/// Unit-variance noise draw for the given model.
double lad_noise(LadModel model, Rng& rng);

// ---------------------------------------------------------------- LASSO

/// y = x.theta + eps, x ~ N(0, equicorrelation rho), eps ~ N(0, 1),
/// theta = (1, 2, -2, 3, 0, ..., 0); x columns and y are centered.
struct LassoDesign {
  std::size_t n = 1000;
  std::size_t p = 50;
  double rho = 0.6;
  std::uint64_t seed = 0;
};

Parameter lasso_truth(std::size_t p);
Dataset gen_lasso(const LassoDesign& design);

// ---------------------------------------------------------------- population target

struct TargetSpec {
  std::size_t samples = 1'000'000;
  std::size_t max_iters = 4000;
  double lr = 1.0;
  double tol = 1e-9;          // relative improvement counted as progress
  std::size_t patience = 200;  // iterations without progress before stopping
  std::uint64_t seed = 12345;
};

struct TargetResult {
  Parameter theta0;
  double objective = 0.0;  // mean loss at theta0
  std::size_t iterations = 0;
  bool converged = false;  // false when max_iters ran out before the plateau
};

/// Minimizes the mean loss over `sample` (a large fresh draw standing in for
/// the population) by subgradient descent with steps lr / sqrt(t), keeping
/// the best iterate.
TargetResult population_target(const LossModel& model, const Dataset& sample, const TargetSpec& spec);
TargetResult population_target(const LossModel& model, const SvmDesign& design, const TargetSpec& spec);
TargetResult population_target(const LossModel& model, const LadDesign& design, const TargetSpec& spec);

}  // namespace deepboot
