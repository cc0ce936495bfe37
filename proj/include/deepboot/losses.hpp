#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>

#include "deepboot/dataset.hpp"

namespace deepboot {

enum class LossKind { Hinge, LAD, Squared };

std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

/// pi(theta) = prod_j (lambda/2) exp(-lambda |theta_j|); the intercept is
/// left unpenalized unless `penalize_intercept` is set. lambda = 0 is read as
/// a flat prior with log density 0.
struct LaplacePrior {
  double lambda = 0.0;
  bool penalize_intercept = false;
};

/// Per-observation loss l(beta, theta; x, y):
///   Hinge    max(0, 1 - y (beta + x.theta))
///   LAD      |y - beta - x.theta|
///   Squared  (y - x.theta)^2   (no intercept; data assumed centered)
struct LossModel {
  LossKind kind = LossKind::LAD;
  bool includes_intercept = true;
  std::optional<LaplacePrior> prior;

  static LossModel hinge() { return {LossKind::Hinge, true, std::nullopt}; }
  static LossModel lad(std::optional<LaplacePrior> prior = std::nullopt) { return {LossKind::LAD, true, prior}; }
  static LossModel squared(std::optional<LaplacePrior> prior = std::nullopt) { return {LossKind::Squared, false, prior}; }

  /// Length of the packed parameter vector: p, plus one for the intercept.
  std::size_t packed_dim(std::size_t p) const { return p + (includes_intercept ? 1 : 0); }
  Eigen::VectorXd pack(const Parameter& param) const;
  Parameter unpack(const Eigen::Ref<const Eigen::VectorXd>& packed) const;
};

/// Throws ContractError when the data cannot be used with the model (hinge
/// labels outside {-1, +1}, non-finite entries).
void validate(const LossModel& model, const Dataset& data);

double loss(const LossModel& model, const Parameter& param, const Eigen::Ref<const Eigen::VectorXd>& x, double y);

/// A subgradient in (beta, theta). Kinks resolve to zero: hinge at margin 1,
/// LAD at residual 0. The intercept entry is 0 for models without one.
Parameter loss_subgrad(const LossModel& model, const Parameter& param, const Eigen::Ref<const Eigen::VectorXd>& x,
                       double y);

double log_prior(const LaplacePrior& prior, const Parameter& param);
Parameter log_prior_subgrad(const LaplacePrior& prior, const Parameter& param);

/// Unnormalized Gibbs posterior log density, log pi(theta) - alpha * sum_i l(theta; x_i).
double gibbs_log_density(const LossModel& model, const Parameter& param, const Dataset& data, double alpha);

/// sum_i w_i l(param; x_i) - prior_weight * log pi(param); the prior term is
/// dropped when the model carries no prior.
double weighted_objective(const LossModel& model, const Parameter& param, const Dataset& data,
                          const Eigen::Ref<const Eigen::VectorXd>& weights, double prior_weight);

/// Subgradient of weighted_objective in (beta, theta).
Parameter weighted_objective_subgrad(const LossModel& model, const Parameter& param, const Dataset& data,
                                     const Eigen::Ref<const Eigen::VectorXd>& weights, double prior_weight);

struct ObjectiveWithSubgrad {
  double value;
  Parameter subgrad;
};

/// Value and subgradient of weighted_objective from a single pass over the data.
ObjectiveWithSubgrad weighted_objective_with_subgrad(const LossModel& model, const Parameter& param,
                                                     const Dataset& data,
                                                     const Eigen::Ref<const Eigen::VectorXd>& weights,
                                                     double prior_weight);

/// Objective values and packed subgradients for K parameters at once,
/// parameter k paired with weight column k.
struct BatchObjective {
  Eigen::VectorXd values;  // K
  Eigen::MatrixXd grad;    // packed_dim x K
};

BatchObjective weighted_objective_batch(const LossModel& model, const Dataset& data, const Eigen::MatrixXd& packed,
                                        const Eigen::MatrixXd& weights, double prior_weight);

}  // namespace deepboot
