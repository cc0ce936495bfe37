#include "deepboot/losses.hpp"

#include <cmath>

#include "deepboot/errors.hpp"

namespace deepboot {

Dataset concat(const Dataset& a, const Dataset& b) {
  require(a.dim() == b.dim(), "concat: feature dimension mismatch");
  Dataset out;
  out.x.resize(a.x.rows() + b.x.rows(), a.x.cols());
  out.x << a.x, b.x;
  out.y.resize(a.y.size() + b.y.size());
  out.y << a.y, b.y;
  return out;
}

Eigen::VectorXd Parameter::full() const {
  Eigen::VectorXd v(coefs.size() + 1);
  v << intercept, coefs;
  return v;
}

Parameter Parameter::from_full(const Eigen::Ref<const Eigen::VectorXd>& v) {
  require(v.size() >= 1, "Parameter::from_full: empty vector");
  return {v[0], v.tail(v.size() - 1)};
}

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::Hinge: return "hinge";
    case LossKind::LAD: return "lad";
    case LossKind::Squared: return "squared";
  }
  return "?";
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "hinge") return LossKind::Hinge;
  if (s == "lad") return LossKind::LAD;
  if (s == "squared") return LossKind::Squared;
  throw ContractError("unknown loss kind '" + s + "'");
}

Eigen::VectorXd LossModel::pack(const Parameter& param) const {
  if (!includes_intercept) return param.coefs;
  return param.full();
}

Parameter LossModel::unpack(const Eigen::Ref<const Eigen::VectorXd>& packed) const {
  if (!includes_intercept) return {0.0, packed};
  return Parameter::from_full(packed);
}

namespace {

struct PointLoss {
  double value;
  double dfdf;  // derivative with respect to the linear predictor
};

// f is beta + x.theta (x.theta for Squared).
inline PointLoss point_loss(LossKind kind, double f, double y) {
  switch (kind) {
    case LossKind::Hinge: {
      const double slack = 1.0 - y * f;
      return slack > 0.0 ? PointLoss{slack, -y} : PointLoss{0.0, 0.0};
    }
    case LossKind::LAD: {
      const double r = y - f;
      return {std::abs(r), r > 0.0 ? -1.0 : (r < 0.0 ? 1.0 : 0.0)};
    }
    case LossKind::Squared: {
      const double r = y - f;
      return {r * r, -2.0 * r};
    }
  }
  return {0.0, 0.0};
}

inline double predictor(const LossModel& model, const Parameter& param, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return (model.includes_intercept ? param.intercept : 0.0) + x.dot(param.coefs);
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_point(const LossModel& model, const Parameter& param, const Eigen::Ref<const Eigen::VectorXd>& x,
                 double y) {
  require(x.size() == param.coefs.size(), "loss: feature length " + std::to_string(x.size()) +
                                              " does not match parameter dimension " +
                                              std::to_string(param.coefs.size()));
  if (model.kind == LossKind::Hinge) require(y == 1.0 || y == -1.0, "hinge loss: label must be -1 or +1");
}

}  // namespace

void validate(const LossModel& model, const Dataset& data) {
  require(data.x.rows() == data.y.size(), "dataset: x has " + std::to_string(data.x.rows()) + " rows but y has " +
                                              std::to_string(data.y.size()));
  require(data.x.allFinite() && data.y.allFinite(), "dataset: non-finite entries");
  if (model.kind == LossKind::Hinge) {
    for (Eigen::Index i = 0; i < data.y.size(); ++i) {
      require(data.y[i] == 1.0 || data.y[i] == -1.0, "hinge loss: label at row " + std::to_string(i) + " is not +-1");
    }
  }
  if (model.prior) require(model.prior->lambda >= 0.0, "Laplace prior: lambda must be nonnegative");
}

double loss(const LossModel& model, const Parameter& param, const Eigen::Ref<const Eigen::VectorXd>& x, double y) {
  check_point(model, param, x, y);
  return point_loss(model.kind, predictor(model, param, x), y).value;
}

Parameter loss_subgrad(const LossModel& model, const Parameter& param, const Eigen::Ref<const Eigen::VectorXd>& x,
                       double y) {
  check_point(model, param, x, y);
  const double d = point_loss(model.kind, predictor(model, param, x), y).dfdf;
  return {model.includes_intercept ? d : 0.0, d * x};
}

double log_prior(const LaplacePrior& prior, const Parameter& param) {
  require(prior.lambda >= 0.0, "Laplace prior: lambda must be nonnegative");
  if (prior.lambda == 0.0) return 0.0;
  const double per_coord = std::log(prior.lambda / 2.0);
  double lp = static_cast<double>(param.coefs.size()) * per_coord - prior.lambda * param.coefs.lpNorm<1>();
  if (prior.penalize_intercept) lp += per_coord - prior.lambda * std::abs(param.intercept);
  return lp;
}

Parameter log_prior_subgrad(const LaplacePrior& prior, const Parameter& param) {
  Parameter g = Parameter::zero(param.dim());
  if (prior.lambda == 0.0) return g;
  g.coefs = -prior.lambda * param.coefs.unaryExpr([](double v) { return sign(v); });
  if (prior.penalize_intercept) g.intercept = -prior.lambda * sign(param.intercept);
  return g;
}

double gibbs_log_density(const LossModel& model, const Parameter& param, const Dataset& data, double alpha) {
  require(alpha > 0.0, "gibbs_log_density: alpha must be positive");
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(data.size()));
  const double risk = weighted_objective(LossModel{model.kind, model.includes_intercept, std::nullopt}, param, data,
                                         ones, 0.0);
  const double lp = model.prior ? log_prior(*model.prior, param) : 0.0;
  return lp - alpha * risk;
}

double weighted_objective(const LossModel& model, const Parameter& param, const Dataset& data,
                          const Eigen::Ref<const Eigen::VectorXd>& weights, double prior_weight) {
  require(weights.size() == static_cast<Eigen::Index>(data.size()),
          "weighted_objective: " + std::to_string(weights.size()) + " weights for " + std::to_string(data.size()) +
              " observations");
  require(data.dim() == param.dim(), "weighted_objective: parameter dimension mismatch");
  const double b = model.includes_intercept ? param.intercept : 0.0;
  const Eigen::VectorXd f = (data.x * param.coefs).array() + b;
  double total = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    if (weights[i] != 0.0) total += weights[i] * point_loss(model.kind, f[i], data.y[i]).value;
  }
  if (model.prior && prior_weight != 0.0) total -= prior_weight * log_prior(*model.prior, param);
  return total;
}

ObjectiveWithSubgrad weighted_objective_with_subgrad(const LossModel& model, const Parameter& param,
                                                     const Dataset& data,
                                                     const Eigen::Ref<const Eigen::VectorXd>& weights,
                                                     double prior_weight) {
  require(weights.size() == static_cast<Eigen::Index>(data.size()), "weighted_objective_subgrad: weight length mismatch");
  require(data.dim() == param.dim(), "weighted_objective_subgrad: parameter dimension mismatch");
  const double b = model.includes_intercept ? param.intercept : 0.0;
  const Eigen::VectorXd f = (data.x * param.coefs).array() + b;
  Eigen::VectorXd d(f.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const PointLoss pl = point_loss(model.kind, f[i], data.y[i]);
    total += weights[i] * pl.value;
    d[i] = weights[i] * pl.dfdf;
  }
  ObjectiveWithSubgrad out{total, {model.includes_intercept ? d.sum() : 0.0, data.x.transpose() * d}};
  if (model.prior && prior_weight != 0.0) {
    out.value -= prior_weight * log_prior(*model.prior, param);
    const Parameter pg = log_prior_subgrad(*model.prior, param);
    out.subgrad.intercept -= prior_weight * pg.intercept;
    out.subgrad.coefs -= prior_weight * pg.coefs;
  }
  return out;
}

Parameter weighted_objective_subgrad(const LossModel& model, const Parameter& param, const Dataset& data,
                                     const Eigen::Ref<const Eigen::VectorXd>& weights, double prior_weight) {
  return weighted_objective_with_subgrad(model, param, data, weights, prior_weight).subgrad;
}

BatchObjective weighted_objective_batch(const LossModel& model, const Dataset& data, const Eigen::MatrixXd& packed,
                                        const Eigen::MatrixXd& weights, double prior_weight) {
  const auto p = static_cast<Eigen::Index>(data.dim());
  const auto dim = static_cast<Eigen::Index>(model.packed_dim(data.dim()));
  const Eigen::Index k = packed.cols();
  require(packed.rows() == dim, "weighted_objective_batch: packed parameter rows mismatch");
  require(weights.rows() == static_cast<Eigen::Index>(data.size()) && weights.cols() == k,
          "weighted_objective_batch: weight matrix shape mismatch");

  const Eigen::Index off = model.includes_intercept ? 1 : 0;
  Eigen::MatrixXd f = data.x * packed.bottomRows(p);
  if (model.includes_intercept) f.rowwise() += packed.row(0);

  BatchObjective out;
  out.values = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd d(f.rows(), k);
  for (Eigen::Index c = 0; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      const double w = weights(i, c);
      const PointLoss pl = point_loss(model.kind, f(i, c), data.y[i]);
      total += w * pl.value;
      d(i, c) = w * pl.dfdf;
    }
    out.values[c] = total;
  }
  out.grad.resize(dim, k);
  out.grad.bottomRows(p).noalias() = data.x.transpose() * d;
  if (model.includes_intercept) out.grad.row(0) = d.colwise().sum();

  if (model.prior && prior_weight != 0.0) {
    for (Eigen::Index c = 0; c < k; ++c) {
      const Parameter param = model.unpack(packed.col(c));
      out.values[c] -= prior_weight * log_prior(*model.prior, param);
      const Parameter pg = log_prior_subgrad(*model.prior, param);
      out.grad.col(c).tail(p) -= prior_weight * pg.coefs;
      if (off == 1) out.grad(0, c) -= prior_weight * pg.intercept;
    }
  }
  return out;
}

}  // namespace deepboot
