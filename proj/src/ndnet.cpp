#include "deepboot/ndnet.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>

#include "deepboot/errors.hpp"

namespace deepboot {

namespace {

constexpr int kCheckpointVersion = 1;

void activate(Eigen::MatrixXd& z, Activation a) {
  if (a == Activation::ReLU) {
    z = z.cwiseMax(0.0);
  } else {
    z = (1.0 + (-z.array()).exp()).inverse().matrix();
  }
}

// Multiplies `delta` in place by g'(.) expressed through the activation value.
void apply_activation_derivative(Eigen::MatrixXd& delta, const Eigen::MatrixXd& act, Activation a) {
  if (a == Activation::ReLU) {
    delta = (act.array() > 0.0).select(delta.array(), 0.0).matrix();
  } else {
    delta.array() *= act.array() * (1.0 - act.array());
  }
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::ReLU ? "relu" : "sigmoid"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw ContractError("unknown activation '" + s + "'");
}

GeneratorNetwork::GeneratorNetwork(std::size_t input_dim, std::vector<std::size_t> hidden_widths,
                                   std::size_t output_dim, Activation activation)
    : input_dim_(input_dim),
      output_dim_(output_dim),
      hidden_widths_(std::move(hidden_widths)),
      activation_(activation) {
  require(input_dim_ > 0, "GeneratorNetwork: input_dim must be positive");
  require(output_dim_ > 0, "GeneratorNetwork: output_dim must be positive");
  for (auto w : hidden_widths_) require(w > 0, "GeneratorNetwork: hidden widths must be positive");

  std::size_t offset = 0;
  std::size_t prev_hidden = 0;
  for (std::size_t l = 0; l <= hidden_widths_.size(); ++l) {
    const std::size_t rows = l < hidden_widths_.size() ? hidden_widths_[l] : output_dim_;
    const std::size_t cols = prev_hidden + input_dim_;
    layers_.push_back({offset, rows, cols, prev_hidden});
    offset += rows * cols + rows;
    prev_hidden = rows;
  }
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
}

std::size_t GeneratorNetwork::param_count_for(std::size_t input_dim,
                                              const std::vector<std::size_t>& hidden_widths,
                                              std::size_t output_dim) {
  std::size_t count = 0;
  std::size_t prev_hidden = 0;
  for (std::size_t l = 0; l <= hidden_widths.size(); ++l) {
    const std::size_t rows = l < hidden_widths.size() ? hidden_widths[l] : output_dim;
    count += (prev_hidden + input_dim + 1) * rows;
    prev_hidden = rows;
  }
  return count;
}

void GeneratorNetwork::set_params(const Eigen::VectorXd& p) {
  require(p.size() == params_.size(), "GeneratorNetwork::set_params: parameter count mismatch");
  params_ = p;
}

Eigen::Map<const Eigen::MatrixXd> GeneratorNetwork::weight(const Layer& l) const {
  return {params_.data() + l.offset, static_cast<Eigen::Index>(l.rows), static_cast<Eigen::Index>(l.cols)};
}

Eigen::Map<const Eigen::VectorXd> GeneratorNetwork::bias(const Layer& l) const {
  return {params_.data() + l.offset + l.rows * l.cols, static_cast<Eigen::Index>(l.rows)};
}

void GeneratorNetwork::initialize(Rng& rng) {
  params_.setZero();
  for (const auto& l : layers_) {
    const double a = std::sqrt(6.0 / static_cast<double>(l.rows + l.cols));
    for (std::size_t i = 0; i < l.rows * l.cols; ++i) {
      params_[static_cast<Eigen::Index>(l.offset + i)] = a * (2.0 * rng.uniform() - 1.0);
    }
  }
}

Eigen::MatrixXd GeneratorNetwork::forward_batch(const Eigen::MatrixXd& inputs, ForwardCache* cache) const {
  require(inputs.rows() == static_cast<Eigen::Index>(input_dim_),
          "GeneratorNetwork::forward: input has " + std::to_string(inputs.rows()) +
              " rows, expected " + std::to_string(input_dim_));
  if (cache) cache->hidden.resize(hidden_widths_.size());

  Eigen::MatrixXd prev;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& l = layers_[li];
    const auto A = weight(l);
    Eigen::MatrixXd z = A.rightCols(static_cast<Eigen::Index>(input_dim_)) * inputs;
    if (l.hidden_in > 0) z.noalias() += A.leftCols(static_cast<Eigen::Index>(l.hidden_in)) * prev;
    z.colwise() += bias(l);
    if (li + 1 == layers_.size()) return z;
    activate(z, activation_);
    if (cache) cache->hidden[li] = z;
    prev = std::move(z);
  }
  return prev;  // unreachable: there is always an output layer
}

Eigen::VectorXd GeneratorNetwork::forward(const Eigen::VectorXd& w) const {
  return forward_batch(w).col(0);
}

Eigen::VectorXd GeneratorNetwork::backward_batch(const Eigen::MatrixXd& inputs, const ForwardCache& cache,
                                                 const Eigen::MatrixXd& out_grad) const {
  require(inputs.rows() == static_cast<Eigen::Index>(input_dim_), "GeneratorNetwork::backward: input dimension mismatch");
  require(out_grad.rows() == static_cast<Eigen::Index>(output_dim_) && out_grad.cols() == inputs.cols(),
          "GeneratorNetwork::backward: out_grad dimension mismatch");
  require(cache.hidden.size() == hidden_widths_.size(), "GeneratorNetwork::backward: stale forward cache");

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
  Eigen::MatrixXd delta = out_grad;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& l = layers_[li];
    const auto in = static_cast<Eigen::Index>(input_dim_);
    const auto hin = static_cast<Eigen::Index>(l.hidden_in);
    Eigen::Map<Eigen::MatrixXd> gA(grad.data() + l.offset, static_cast<Eigen::Index>(l.rows),
                                   static_cast<Eigen::Index>(l.cols));
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + l.offset + l.rows * l.cols, static_cast<Eigen::Index>(l.rows));

    gA.rightCols(in).noalias() = delta * inputs.transpose();
    gb = delta.rowwise().sum();
    if (hin == 0) break;
    const Eigen::MatrixXd& prev = cache.hidden[li - 1];
    gA.leftCols(hin).noalias() = delta * prev.transpose();
    Eigen::MatrixXd next = weight(l).leftCols(hin).transpose() * delta;
    apply_activation_derivative(next, prev, activation_);
    delta = std::move(next);
  }
  return grad;
}

Eigen::VectorXd GeneratorNetwork::backward(const Eigen::VectorXd& w, const Eigen::VectorXd& out_grad) const {
  ForwardCache cache;
  forward_batch(w, &cache);
  return backward_batch(w, cache, out_grad);
}

RmspropState RmspropState::for_params(std::size_t n, double base_lr, double lr_decay_exponent) {
  RmspropState s;
  s.sq_grad_avg = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  s.base_lr = base_lr;
  s.lr_decay_exponent = lr_decay_exponent;
  return s;
}

double RmspropState::learning_rate(std::size_t step) const {
  return base_lr * std::pow(static_cast<double>(step), -lr_decay_exponent);
}

void rmsprop_step(RmspropState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  require(params.size() == grad.size() && state.sq_grad_avg.size() == params.size(),
          "rmsprop_step: length mismatch");
  ++state.epoch;
  const double lr = state.learning_rate(state.epoch);
  state.sq_grad_avg = state.decay * state.sq_grad_avg + (1.0 - state.decay) * grad.cwiseAbs2();
  params.array() -= lr * grad.array() / (state.sq_grad_avg.array() + state.epsilon).sqrt();
}

void save_checkpoint(const std::filesystem::path& path, const GeneratorNetwork& net,
                     const RmspropState& optimizer) {
  nlohmann::json j;
  j["format"] = "deepboot-generator";
  j["version"] = kCheckpointVersion;
  j["input_dim"] = net.input_dim();
  j["hidden_widths"] = net.hidden_widths();
  j["output_dim"] = net.output_dim();
  j["activation"] = to_string(net.activation());
  j["params"] = std::vector<double>(net.params().data(), net.params().data() + net.params().size());
  j["optimizer"] = {
      {"sq_grad_avg", std::vector<double>(optimizer.sq_grad_avg.data(),
                                          optimizer.sq_grad_avg.data() + optimizer.sq_grad_avg.size())},
      {"decay", optimizer.decay},
      {"epsilon", optimizer.epsilon},
      {"base_lr", optimizer.base_lr},
      {"lr_decay_exponent", optimizer.lr_decay_exponent},
      {"epoch", optimizer.epoch},
  };
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  const auto j = nlohmann::json::parse(in);
  if (j.value("format", "") != "deepboot-generator") throw ContractError("not a generator checkpoint: " + path.string());
  if (j.at("version").get<int>() != kCheckpointVersion) throw ContractError("unsupported checkpoint version");

  Checkpoint ck;
  ck.net = GeneratorNetwork(j.at("input_dim").get<std::size_t>(), j.at("hidden_widths").get<std::vector<std::size_t>>(),
                            j.at("output_dim").get<std::size_t>(),
                            activation_from_string(j.at("activation").get<std::string>()));
  const auto p = j.at("params").get<std::vector<double>>();
  ck.net.set_params(Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())));

  const auto& o = j.at("optimizer");
  const auto sq = o.at("sq_grad_avg").get<std::vector<double>>();
  ck.optimizer.sq_grad_avg = Eigen::Map<const Eigen::VectorXd>(sq.data(), static_cast<Eigen::Index>(sq.size()));
  ck.optimizer.decay = o.at("decay").get<double>();
  ck.optimizer.epsilon = o.at("epsilon").get<double>();
  ck.optimizer.base_lr = o.at("base_lr").get<double>();
  ck.optimizer.lr_decay_exponent = o.at("lr_decay_exponent").get<double>();
  ck.optimizer.epoch = o.at("epoch").get<std::size_t>();
  return ck;
}

}  // namespace deepboot
