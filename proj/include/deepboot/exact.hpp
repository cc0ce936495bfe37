#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "deepboot/dataset.hpp"
#include "deepboot/losses.hpp"
#include "deepboot/rng.hpp"
#include "deepboot/sample_batch.hpp"
#include "deepboot/weights.hpp"

namespace deepboot {

enum class BatchMode { Full, Stochastic };

struct SolverConfig {
  std::size_t max_epochs = 20000;
  std::vector<double> lr_grid{1e-4, 1e-3, 1e-2, 1e-1};
  std::size_t early_stop_patience = 200;
  double early_stop_tol = 1e-6;
  BatchMode batch_mode = BatchMode::Full;
  std::size_t minibatch = 32;  // rows per step in stochastic mode
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0: hardware concurrency
};

struct SolveResult {
  Parameter param;
  double objective = 0.0;
  double lr = 0.0;          // grid entry that produced `param` (0 for coordinate descent)
  std::size_t epochs = 0;   // epochs run by the winning grid entry
};

/// Approximate minimizer of weighted_objective(model, ., data, weights, prior_weight).
///
/// Hinge and LAD: subgradient descent from zero on the objective divided by
/// the total weight, steps lr / sqrt(t), with the Laplace penalty applied by
/// soft thresholding after each step; best iterate kept, early stopping
/// when the best value stops improving by early_stop_tol (relative) over
/// early_stop_patience epochs; run once per lr_grid entry, lowest objective
/// wins. Squared loss: cyclic coordinate descent with soft thresholding on
/// the weighted Gram matrix, which is exact for the weighted lasso.
SolveResult solve_weighted(const Dataset& data, const LossModel& model, const Eigen::Ref<const Eigen::VectorXd>& weights,
                           const SolverConfig& solver, double prior_weight = 1.0);

inline SolveResult solve_weighted(const Dataset& data, const LossModel& model, const WeightVector& weights,
                                  const SolverConfig& solver, double prior_weight = 1.0) {
  return solve_weighted(data, model, weights.expanded, solver, prior_weight);
}

/// Source of weights for wlb_sample; the default draws n * Dir(1, ..., 1).
using WeightSource = std::function<Eigen::VectorXd(std::size_t n, Rng& rng)>;

/// Weighted likelihood bootstrap: draw i minimizes the objective under fresh
/// weights, with the model's prior acting as a fixed penalty. Draw i uses the
/// stream derive_seed(seed, {i}), so results do not depend on thread count.
SampleBatch wlb_sample(const Dataset& data, const LossModel& model, std::size_t draws, const SolverConfig& solver,
                       std::uint64_t seed, const WeightSource& weight_source = {});

/// Generates n' pseudo observations from the prior centering measure.
using PseudoSource = std::function<Dataset(std::size_t n_prime, Rng& rng)>;

/// NPL posterior bootstrap: per draw, fresh pseudo data and
/// (n + n') * Dir(1, ..., 1, alpha/n', ..., alpha/n') weights; the prior enters
/// only through the pseudo data. alpha = 0 is the Bayesian bootstrap.
SampleBatch npl_sample(const Dataset& data, const LossModel& model, const PseudoSource& pseudo_source, double alpha,
                       std::size_t n_prime, std::size_t draws, const SolverConfig& solver, std::uint64_t seed);

/// Penalized empirical risk minimizer (all weights one, prior as penalty).
SolveResult penalized_optimum(const Dataset& data, const LossModel& model, const SolverConfig& solver);

}  // namespace deepboot
