#include "deepboot/exact.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "deepboot/errors.hpp"
#include "deepboot/parallel.hpp"

namespace deepboot {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

struct Descent {
  Parameter param;
  double objective;
  std::size_t epochs;
};

// Proximal subgradient descent from `start` with normalized steps
// lr / (sqrt(t) |g|), keeping the best iterate. Stops
// after `patience` epochs without a relative improvement of `tol`, or after
// `budget` epochs.
Descent descend(const Dataset& data, const LossModel& model, const Eigen::Ref<const Eigen::VectorXd>& weights,
                const SolverConfig& solver, double prior_weight, const Parameter& start, double lr, std::size_t budget,
                double tol, Rng& rng) {
  Parameter current = start;
  Descent best{current, std::numeric_limits<double>::infinity(), 0};
  double reference = std::numeric_limits<double>::infinity();
  std::size_t last_progress = 0;

  std::vector<Eigen::Index> rows;
  if (solver.batch_mode == BatchMode::Stochastic) {
    for (Eigen::Index i = 0; i < weights.size(); ++i)
      if (weights[i] > 0.0) rows.push_back(i);
  }

  // The Laplace penalty is handled by its proximal map (soft thresholding),
  // which produces exact zeros; the data term takes a subgradient step.
  const double lambda = (model.prior && prior_weight != 0.0) ? model.prior->lambda * prior_weight : 0.0;
  const bool penalize_intercept = model.prior && model.prior->penalize_intercept;
  for (std::size_t t = 1; t <= budget; ++t) {
    auto [value, g] = weighted_objective_with_subgrad(model, current, data, weights, 0.0);
    if (model.prior && prior_weight != 0.0) value -= prior_weight * log_prior(*model.prior, current);
    if (!std::isfinite(value)) {
      throw NumericalError("solve_weighted: non-finite objective at iteration " + std::to_string(t) + " with lr " +
                           std::to_string(lr));
    }
    best.epochs = t;
    if (value < best.objective) {
      best.objective = value;
      best.param = current;
    }
    if (t == 1 || best.objective < reference - tol * std::max(std::abs(reference), 1e-12)) {
      reference = best.objective;
      last_progress = t;
    } else if (t - last_progress >= solver.early_stop_patience) {
      break;
    }

    if (solver.batch_mode == BatchMode::Stochastic && !rows.empty()) {
      // Unbiased minibatch estimate of the data term.
      const std::size_t m = std::min(solver.minibatch, rows.size());
      Eigen::VectorXd wb = Eigen::VectorXd::Zero(weights.size());
      const double inflate = static_cast<double>(rows.size()) / static_cast<double>(m);
      for (std::size_t j = 0; j < m; ++j) {
        const Eigen::Index i = rows[rng.index(rows.size())];
        wb[i] += inflate * weights[i];
      }
      g = weighted_objective_subgrad(model, current, data, wb, 0.0);
    }

    // Normalized step: lr / sqrt(t) is the distance moved by the data term.
    const double gnorm = std::sqrt(g.intercept * g.intercept + g.coefs.squaredNorm());
    const double base = lr / std::sqrt(static_cast<double>(t));
    const double step = gnorm > 0.0 ? base / gnorm : base;
    current.intercept -= step * g.intercept;
    current.coefs -= step * g.coefs;
    if (lambda > 0.0) {
      const double thr = step * lambda;
      current.coefs = current.coefs.unaryExpr([thr](double v) { return soft_threshold(v, thr); });
      if (penalize_intercept) current.intercept = soft_threshold(current.intercept, thr);
    }
  }
  return best;
}

constexpr int kRefineStages = 30;
constexpr int kIrlsIterations = 50;

// Approximate weighted LAD fit by iteratively reweighted least squares,
// used only as a starting point. Falls back to zero when a solve fails.
Parameter lad_start(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& weights) {
  const Eigen::Index n = data.x.rows();
  const Eigen::Index p = data.x.cols();
  Eigen::MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = data.x;
  const double floor = 1e-6 * std::max(1.0, data.y.cwiseAbs().maxCoeff());
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(p + 1);
  Eigen::VectorXd irls = weights;
  for (int it = 0; it < kIrlsIterations; ++it) {
    const Eigen::MatrixXd weighted = design.array().colwise() * irls.array();
    Eigen::MatrixXd gram = weighted.transpose() * design;
    gram.diagonal().array() += 1e-10 * std::max(1.0, gram.diagonal().maxCoeff());
    const Eigen::VectorXd next = gram.ldlt().solve(weighted.transpose() * data.y);
    if (!next.allFinite()) break;
    coef = next;
    const Eigen::VectorXd resid = (data.y - design * coef).cwiseAbs().cwiseMax(floor);
    irls = weights.cwiseQuotient(resid);
  }
  return Parameter::from_full(coef);
}

SolveResult subgradient_descent(const Dataset& data, const LossModel& model, const Eigen::Ref<const Eigen::VectorXd>& weights,
                                const SolverConfig& solver, double prior_weight) {
  Rng rng(solver.seed);
  const Parameter start = model.kind == LossKind::LAD ? lad_start(data, weights) : Parameter::zero(data.dim());
  SolveResult best;
  best.objective = std::numeric_limits<double>::infinity();
  for (double lr : solver.lr_grid) {
    const Descent d = descend(data, model, weights, solver, prior_weight, start, lr,
                              solver.max_epochs, solver.early_stop_tol, rng);
    if (d.objective < best.objective) best = {d.param, d.objective, lr, d.epochs};
  }

  // Restart the winning run from its best iterate with halved steps; on
  // piecewise-linear objectives this sharpens the solution geometrically.
  std::size_t used = best.epochs;
  double lr = best.lr;
  for (int stage = 0; stage < kRefineStages && used < solver.max_epochs; ++stage) {
    lr *= 0.5;
    const Descent d = descend(data, model, weights, solver, prior_weight, best.param, lr, solver.max_epochs - used, 0.0, rng);
    used += d.epochs;
    if (d.objective < best.objective) {
      best.param = d.param;
      best.objective = d.objective;
    }
  }
  best.epochs = used;
  return best;
}

// min sum_i w_i (y_i - x_i.theta)^2 + lambda ||theta||_1
SolveResult weighted_lasso(const Dataset& data, const LossModel& model, const Eigen::Ref<const Eigen::VectorXd>& weights,
                           const SolverConfig& solver, double prior_weight) {
  const double lambda = (model.prior ? model.prior->lambda : 0.0) * prior_weight;
  const Eigen::MatrixXd xw = data.x.array().colwise() * weights.array();
  const Eigen::MatrixXd gram = xw.transpose() * data.x;
  const Eigen::VectorXd xty = xw.transpose() * data.y;
  const auto p = gram.rows();

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd gtheta = Eigen::VectorXd::Zero(p);  // gram * theta
  std::size_t sweeps = 0;
  for (; sweeps < solver.max_epochs; ++sweeps) {
    double max_change = 0.0;
    double max_coef = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double gjj = gram(j, j);
      if (gjj <= 0.0) continue;
      const double rho = xty[j] - (gtheta[j] - gjj * theta[j]);
      const double updated = soft_threshold(2.0 * rho, lambda) / (2.0 * gjj);
      const double delta = updated - theta[j];
      if (delta != 0.0) {
        gtheta += delta * gram.col(j);
        theta[j] = updated;
      }
      max_change = std::max(max_change, std::abs(delta));
      max_coef = std::max(max_coef, std::abs(updated));
    }
    if (max_change <= 1e-10 * std::max(1.0, max_coef)) {
      ++sweeps;
      break;
    }
  }
  const Parameter param{0.0, theta};
  return {param, weighted_objective(model, param, data, weights, prior_weight), 0.0, sweeps};
}

void check_weights(const Dataset& data, const Eigen::Ref<const Eigen::VectorXd>& weights) {
  require(weights.size() == static_cast<Eigen::Index>(data.size()),
          "solve_weighted: " + std::to_string(weights.size()) + " weights for " + std::to_string(data.size()) +
              " observations");
  require((weights.array() >= 0.0).all() && weights.allFinite(), "solve_weighted: weights must be finite and nonnegative");
}

}  // namespace

SolveResult solve_weighted(const Dataset& data, const LossModel& model, const Eigen::Ref<const Eigen::VectorXd>& weights,
                           const SolverConfig& solver, double prior_weight) {
  validate(model, data);
  check_weights(data, weights);
  require(!solver.lr_grid.empty(), "solve_weighted: empty learning-rate grid");
  for (double lr : solver.lr_grid) require(lr > 0.0, "solve_weighted: learning rates must be positive");
  require(solver.max_epochs >= 1, "solve_weighted: max_epochs must be positive");

  if (model.kind == LossKind::Squared) return weighted_lasso(data, model, weights, solver, prior_weight);

  return subgradient_descent(data, model, weights, solver, prior_weight);
}

SolveResult penalized_optimum(const Dataset& data, const LossModel& model, const SolverConfig& solver) {
  return solve_weighted(data, model, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(data.size())), solver, 1.0);
}

SampleBatch wlb_sample(const Dataset& data, const LossModel& model, std::size_t draws, const SolverConfig& solver,
                       std::uint64_t seed, const WeightSource& weight_source) {
  require(draws >= 1, "wlb_sample: need at least one draw");
  validate(model, data);
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = data.size();
  const auto spec = DirichletSpec::symmetric(n, 1.0, static_cast<double>(n));

  SampleBatch batch;
  batch.method = Method::WLB;
  batch.draws.resize(static_cast<Eigen::Index>(draws), static_cast<Eigen::Index>(data.dim() + 1));
  parallel_for(
      draws,
      [&](std::size_t i) {
        Rng rng(derive_seed(seed, {i}));
        const Eigen::VectorXd w = weight_source ? weight_source(n, rng) : draw_dirichlet(spec, rng);
        SolverConfig cfg = solver;
        cfg.seed = derive_seed(seed, {i, 1});
        try {
          batch.draws.row(static_cast<Eigen::Index>(i)) = solve_weighted(data, model, w, cfg, 1.0).param.full().transpose();
        } catch (const NumericalError& e) {
          throw NumericalError("wlb_sample draw " + std::to_string(i) + ": " + e.what());
        }
      },
      solver.threads);
  batch.sample_seconds = seconds_since(t0);
  return batch;
}

SampleBatch npl_sample(const Dataset& data, const LossModel& model, const PseudoSource& pseudo_source, double alpha,
                       std::size_t n_prime, std::size_t draws, const SolverConfig& solver, std::uint64_t seed) {
  require(draws >= 1, "npl_sample: need at least one draw");
  require(alpha >= 0.0, "npl_sample: alpha must be nonnegative");
  validate(model, data);
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = data.size();
  const bool use_pseudo = alpha > 0.0 && n_prime > 0;
  if (use_pseudo) require(static_cast<bool>(pseudo_source), "npl_sample: alpha > 0 needs a pseudo-data source");

  SampleBatch batch;
  batch.method = Method::WLB;
  batch.draws.resize(static_cast<Eigen::Index>(draws), static_cast<Eigen::Index>(data.dim() + 1));
  parallel_for(
      draws,
      [&](std::size_t i) {
        Rng rng(derive_seed(seed, {i}));
        SolverConfig cfg = solver;
        cfg.seed = derive_seed(seed, {i, 1});
        Parameter solution;
        try {
          if (!use_pseudo) {
            const Eigen::VectorXd w = draw_dirichlet(DirichletSpec::symmetric(n, 1.0, static_cast<double>(n)), rng);
            solution = solve_weighted(data, model, w, cfg, 0.0).param;
          } else {
            const Dataset pseudo = pseudo_source(n_prime, rng);
            DirichletSpec spec;
            spec.scale = static_cast<double>(n + n_prime);
            spec.concentration = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n + n_prime));
            spec.concentration.tail(static_cast<Eigen::Index>(n_prime)).setConstant(alpha / static_cast<double>(n_prime));
            const Eigen::VectorXd w = draw_dirichlet(spec, rng);
            solution = solve_weighted(concat(data, pseudo), model, w, cfg, 0.0).param;
          }
        } catch (const NumericalError& e) {
          throw NumericalError("npl_sample draw " + std::to_string(i) + ": " + e.what());
        }
        batch.draws.row(static_cast<Eigen::Index>(i)) = solution.full().transpose();
      },
      solver.threads);
  batch.sample_seconds = seconds_since(t0);
  return batch;
}

}  // namespace deepboot
