#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "deepboot/rng.hpp"

namespace deepboot {

enum class Activation { ReLU, Sigmoid };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Activations kept from a batched forward pass for the backward pass.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> hidden;  // post-activation, one per hidden layer
};

/// Fully connected generator with weight reinjection: the raw input vector
/// is concatenated to the activations feeding every layer after the first,
///
///   a_1 = g(A_0 w + b_0),  a_{l+1} = g(A_l [a_l; w] + b_l),  out = A_L [a_L; w] + b_L.
///
/// The output layer is affine. Parameters live in one flat vector; each layer
/// stores its weight matrix column-major followed by its bias.
class GeneratorNetwork {
 public:
  GeneratorNetwork() = default;
  GeneratorNetwork(std::size_t input_dim, std::vector<std::size_t> hidden_widths,
                   std::size_t output_dim, Activation activation = Activation::ReLU);

  static std::size_t param_count_for(std::size_t input_dim,
                                     const std::vector<std::size_t>& hidden_widths,
                                     std::size_t output_dim);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return output_dim_; }
  const std::vector<std::size_t>& hidden_widths() const { return hidden_widths_; }
  Activation activation() const { return activation_; }
  std::size_t param_count() const { return static_cast<std::size_t>(params_.size()); }
  std::size_t layer_count() const { return layers_.size(); }

  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& params() { return params_; }
  void set_params(const Eigen::VectorXd& p);

  /// Glorot-uniform weights, U(-a, a) with a = sqrt(6 / (fan_in + fan_out)); zero biases.
  void initialize(Rng& rng);

  Eigen::VectorXd forward(const Eigen::VectorXd& w) const;

  /// Gradient of out_grad . G(w) with respect to the flat parameters.
  Eigen::VectorXd backward(const Eigen::VectorXd& w, const Eigen::VectorXd& out_grad) const;

  /// Column-batched forward: column k of the result is G(inputs.col(k)).
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs, ForwardCache* cache = nullptr) const;

  /// Sum over columns k of d(out_grad.col(k) . G(inputs.col(k)))/d params.
  /// `cache` must come from forward_batch on the same inputs and parameters.
  Eigen::VectorXd backward_batch(const Eigen::MatrixXd& inputs, const ForwardCache& cache,
                                 const Eigen::MatrixXd& out_grad) const;

 private:
  struct Layer {
    std::size_t offset;  // start of the weight block in params_
    std::size_t rows;
    std::size_t cols;
    std::size_t hidden_in;  // columns fed by the previous layer's activations
  };

  Eigen::Map<const Eigen::MatrixXd> weight(const Layer& l) const;
  Eigen::Map<const Eigen::VectorXd> bias(const Layer& l) const;

  std::size_t input_dim_ = 0;
  std::size_t output_dim_ = 0;
  std::vector<std::size_t> hidden_widths_;
  Activation activation_ = Activation::ReLU;
  std::vector<Layer> layers_;
  Eigen::VectorXd params_;
};

/// RMSprop with a polynomially decaying learning rate,
/// lr_t = base_lr * t^(-lr_decay_exponent) at step t = 1, 2, ...
struct RmspropState {
  Eigen::VectorXd sq_grad_avg;
  double decay = 0.99;
  double epsilon = 1e-8;
  double base_lr = 3e-4;
  double lr_decay_exponent = 0.3;
  std::size_t epoch = 0;  // steps taken so far

  static RmspropState for_params(std::size_t n, double base_lr = 3e-4, double lr_decay_exponent = 0.3);

  double learning_rate(std::size_t step) const;
};

/// One optimizer step: advances `state.epoch`, updates the running squared
/// gradient, and moves `params` against `grad`.
void rmsprop_step(RmspropState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grad);

struct Checkpoint {
  GeneratorNetwork net;
  RmspropState optimizer;
};

/// JSON checkpoint. Doubles are written with round-trip precision so
/// parameters reload bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const GeneratorNetwork& net,
                     const RmspropState& optimizer);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace deepboot
