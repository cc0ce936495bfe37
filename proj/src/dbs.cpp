#include "deepboot/dbs.hpp"

#include <chrono>
#include <cmath>

#include "deepboot/errors.hpp"

namespace deepboot {

namespace {

void check_config(const DbsConfig& cfg) {
  require(cfg.epochs >= 1, "DbsConfig: epochs must be >= 1");
  require(cfg.mc_draws >= 1, "DbsConfig: mc_draws must be >= 1");
  require(cfg.subgroups >= 1, "DbsConfig: subgroups must be >= 1");
  require(cfg.base_lr > 0.0, "DbsConfig: base_lr must be positive");
  require(cfg.rmsprop_decay > 0.0 && cfg.rmsprop_decay < 1.0, "DbsConfig: rmsprop decay must be in (0, 1)");
}

DeepBootstrapSampler train(const Dataset& all, std::size_t p, WeightScheme scheme, const LossModel& model,
                           double prior_weight, const DbsConfig& cfg, Rng& rng) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t out_dim = model.packed_dim(p);
  GeneratorNetwork net(scheme.compact_dim(), cfg.hidden_widths, out_dim, cfg.activation);
  net.initialize(rng);
  RmspropState opt = RmspropState::for_params(net.param_count(), cfg.base_lr, cfg.lr_decay_exponent);
  opt.decay = cfg.rmsprop_decay;
  opt.epsilon = cfg.rmsprop_epsilon;

  std::vector<double> trace;
  trace.reserve(cfg.epochs);
  const double inv_k = 1.0 / static_cast<double>(cfg.mc_draws);
  ForwardCache cache;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const Eigen::MatrixXd compact = scheme.draw_compact_batch(cfg.mc_draws, rng);
    const Eigen::MatrixXd expanded = scheme.expand_batch(compact);
    const Eigen::MatrixXd packed = net.forward_batch(compact, &cache);
    const BatchObjective obj = weighted_objective_batch(model, all, packed, expanded, prior_weight);
    for (Eigen::Index k = 0; k < obj.values.size(); ++k) {
      if (!std::isfinite(obj.values[k]) || !obj.grad.col(k).allFinite()) {
        throw NumericalError("DBS training: non-finite objective at epoch " + std::to_string(epoch) + ", draw " +
                             std::to_string(k));
      }
    }
    trace.push_back(obj.values.mean());
    const Eigen::VectorXd grad = net.backward_batch(compact, cache, obj.grad * inv_k);
    rmsprop_step(opt, net.params(), grad);
  }

  DeepBootstrapSampler s{std::move(net), std::move(opt), std::move(scheme), model, p, std::move(trace), 0.0,
                         std::nullopt};
  s.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

}  // namespace

Eigen::MatrixXd DeepBootstrapSampler::to_draws(const Eigen::MatrixXd& packed) const {
  Eigen::MatrixXd draws(packed.cols(), static_cast<Eigen::Index>(p + 1));
  if (model.includes_intercept) {
    draws = packed.transpose();
  } else {
    draws.col(0).setZero();
    draws.rightCols(static_cast<Eigen::Index>(p)) = packed.transpose();
  }
  return draws;
}

DeepBootstrapSampler train_gibbs(const Dataset& data, const LossModel& model, const DbsConfig& cfg) {
  check_config(cfg);
  validate(model, data);
  require(data.size() >= 1, "train_gibbs: empty dataset");
  Rng rng(cfg.seed);
  const std::size_t s = std::min(cfg.subgroups, data.size());
  auto scheme = WeightScheme::gibbs(GroupMap::shuffled(data.size(), s, rng));
  return train(data, data.dim(), std::move(scheme), model, 1.0, cfg, rng);
}

DeepBootstrapSampler train_npl(const Dataset& data, const Dataset& pseudo, const LossModel& model,
                               const DbsConfig& cfg) {
  check_config(cfg);
  validate(model, data);
  validate(model, pseudo);
  require(pseudo.size() >= 1, "train_npl: need at least one pseudo observation");
  require(cfg.alpha >= 0.0, "train_npl: alpha must be nonnegative");
  Rng rng(cfg.seed);
  const std::size_t s = std::min(cfg.subgroups, data.size());
  const std::size_t sp = std::min(std::max<std::size_t>(cfg.pseudo_subgroups, 1), pseudo.size());
  GroupMap observed = GroupMap::shuffled(data.size(), s, rng);
  GroupMap pseudo_map = GroupMap::shuffled(pseudo.size(), sp, rng);
  auto scheme = WeightScheme::npl(std::move(observed), std::move(pseudo_map), cfg.alpha);
  auto sampler = train(concat(data, pseudo), data.dim(), std::move(scheme), model, 0.0, cfg, rng);
  sampler.pseudo = pseudo;
  return sampler;
}

SampleBatch sample(const DeepBootstrapSampler& sampler, std::size_t count, Rng& rng) {
  require(count >= 1, "sample: need at least one draw");
  const auto t0 = std::chrono::steady_clock::now();
  constexpr std::size_t kChunk = 2048;
  SampleBatch batch;
  batch.method = Method::DBS;
  batch.train_seconds = sampler.train_seconds;
  batch.draws.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(sampler.p + 1));
  for (std::size_t start = 0; start < count; start += kChunk) {
    const std::size_t m = std::min(kChunk, count - start);
    const Eigen::MatrixXd compact = sampler.scheme.draw_compact_batch(m, rng);
    batch.draws.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(m)) =
        sampler.to_draws(sampler.net.forward_batch(compact));
  }
  batch.sample_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return batch;
}

Dataset training_data(const DeepBootstrapSampler& sampler, const Dataset& data) {
  return sampler.pseudo ? concat(data, *sampler.pseudo) : data;
}

double sampler_objective(const DeepBootstrapSampler& sampler, const Dataset& data, const Parameter& param,
                         const Eigen::Ref<const Eigen::VectorXd>& expanded) {
  const double prior_weight = sampler.pseudo ? 0.0 : 1.0;
  return weighted_objective(sampler.model, param, training_data(sampler, data), expanded, prior_weight);
}

std::vector<double> smooth_trace(const std::vector<double>& trace, std::size_t window) {
  require(window >= 1, "smooth_trace: window must be >= 1");
  std::vector<double> out;
  if (trace.size() < window) return out;
  double sum = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    sum += trace[i];
    if (i >= window) sum -= trace[i - window];
    if (i + 1 >= window) out.push_back(sum / static_cast<double>(window));
  }
  return out;
}

}  // namespace deepboot
