#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "deepboot/dataset.hpp"
#include "deepboot/losses.hpp"
#include "deepboot/ndnet.hpp"
#include "deepboot/rng.hpp"
#include "deepboot/sample_batch.hpp"
#include "deepboot/weights.hpp"

namespace deepboot {

struct DbsConfig {
  std::size_t epochs = 4000;           // T
  std::size_t mc_draws = 100;          // K
  std::size_t subgroups = 100;         // S, capped at n
  std::size_t pseudo_subgroups = 10;   // S', capped at n'
  double alpha = 1.0;
  std::size_t n_prime = 0;             // 0: use n
  double base_lr = 3e-4;
  double lr_decay_exponent = 0.3;
  double rmsprop_decay = 0.99;
  double rmsprop_epsilon = 1e-8;
  std::vector<std::size_t> hidden_widths{128, 128, 128};
  Activation activation = Activation::ReLU;
  std::uint64_t seed = 0;
};

/// A trained generator together with the weight law it was trained on.
struct DeepBootstrapSampler {
  GeneratorNetwork net;
  RmspropState optimizer;
  WeightScheme scheme;
  LossModel model;
  std::size_t p = 0;
  std::vector<double> trace;      // Monte Carlo objective per epoch
  double train_seconds = 0.0;
  std::optional<Dataset> pseudo;  // NPL pseudo observations used in training

  /// Packed generator output -> (beta, theta) rows.
  Eigen::MatrixXd to_draws(const Eigen::MatrixXd& packed) const;
};

/// Gibbs-posterior training: each epoch draws K subgroup weight vectors
/// S * Dir(1, ..., 1), evaluates the mean over k of
/// sum_j w_j^k l(G(w~^k); x_j) - log pi(G(w~^k)), and takes one RMSprop step.
DeepBootstrapSampler train_gibbs(const Dataset& data, const LossModel& model, const DbsConfig& cfg);

/// NPL training on the observed rows followed by fixed pseudo rows, with
/// (S + S') * Dir(1, ..., 1, alpha/n', ..., alpha/n') subgroup weights and no
/// log-prior term.
DeepBootstrapSampler train_npl(const Dataset& data, const Dataset& pseudo, const LossModel& model,
                               const DbsConfig& cfg);

/// N iid draws, one forward pass each; timed into sample_seconds.
SampleBatch sample(const DeepBootstrapSampler& sampler, std::size_t count, Rng& rng);

/// Objective of the training loss under the given expanded weights, with the
/// same prior handling as training.
double sampler_objective(const DeepBootstrapSampler& sampler, const Dataset& data, const Parameter& param,
                         const Eigen::Ref<const Eigen::VectorXd>& expanded);

/// Observed rows followed by the training pseudo rows (if any).
Dataset training_data(const DeepBootstrapSampler& sampler, const Dataset& data);

/// Moving average of the trace over `window` epochs.
std::vector<double> smooth_trace(const std::vector<double>& trace, std::size_t window);

}  // namespace deepboot
