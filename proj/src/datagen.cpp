#include "deepboot/datagen.hpp"

#include <cmath>

#include "deepboot/errors.hpp"

namespace deepboot {

Eigen::MatrixXd equicorrelation(std::size_t p, double rho) {
  const auto n = static_cast<Eigen::Index>(p);
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(n, n, rho);
  s.diagonal().setOnes();
  return s;
}

Eigen::MatrixXd toeplitz(std::size_t p, double r) {
  const auto n = static_cast<Eigen::Index>(p);
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) s(i, j) = std::pow(r, static_cast<double>(std::abs(i - j)));
  return s;
}

GaussianSampler::GaussianSampler(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw ContractError("GaussianSampler: covariance is not positive definite");
  chol_ = llt.matrixL();
}

Eigen::VectorXd GaussianSampler::draw(Rng& rng) const {
  Eigen::VectorXd z(chol_.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return chol_.triangularView<Eigen::Lower>() * z;
}

// ---------------------------------------------------------------- SVM

Dataset draw_svm(const SvmDesign& design, std::size_t count, Rng& rng) {
  require(design.p >= 1, "svm design: p must be positive");
  require(design.rho >= 0.0 && design.rho < 1.0, "svm design: rho must be in [0, 1)");
  const GaussianSampler gauss(equicorrelation(design.p, design.rho));
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(design.p));
  d.y.resize(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    const double y = rng.rademacher();
    d.y[i] = y;
    d.x.row(i) = (gauss.draw(rng).array() + design.signal * y).matrix().transpose();
  }
  return d;
}

SvmData gen_svm(const SvmDesign& design) {
  Rng rng(design.seed);
  SvmData out;
  out.train = draw_svm(design, design.n, rng);
  out.test = draw_svm(design, design.test_size, rng);
  return out;
}

Dataset svm_prior_pseudo(const Dataset& observed, std::size_t count, Rng& rng) {
  require(observed.size() > 0, "svm_prior_pseudo: no observed rows");
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(count), observed.x.cols());
  d.y.resize(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    d.x.row(i) = observed.x.row(static_cast<Eigen::Index>(rng.index(observed.size())));
    d.y[i] = rng.rademacher();
  }
  return d;
}

// ---------------------------------------------------------------- LAD

std::string to_string(LadModel m) { return m == LadModel::M1_large_outliers ? "M1" : "M2"; }

LadModel lad_model_from_string(const std::string& s) {
  if (s == "M1" || s == "m1" || s == "M1_large_outliers") return LadModel::M1_large_outliers;
  if (s == "M2" || s == "m2" || s == "M2_laplace") return LadModel::M2_laplace;
  throw ContractError("unknown LAD model '" + s + "'");
}

Parameter lad_truth(std::size_t p) {
  require(p >= LadDesign::kActive, "LAD design needs p >= 3");
  Parameter t = Parameter::zero(p);
  t.intercept = LadDesign::kIntercept;
  t.coefs.head(3) << 1.5, 2.0, 3.0;
  return t;
}

double lad_noise(LadModel model, Rng& rng) {
  if (model == LadModel::M1_large_outliers) {
    // var(v) = 0.9 * 1 + 0.1 * 225 = 23.4
    const double v = rng.uniform() < 0.9 ? rng.normal() : 15.0 * rng.normal();
    return v / std::sqrt(23.4);
  }
  return rng.laplace(1.0) / std::sqrt(2.0);
}

Dataset draw_lad(const LadDesign& design, std::size_t count, Rng& rng) {
  const Parameter truth = lad_truth(design.p);
  const GaussianSampler gauss(toeplitz(design.p, 0.5));
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(design.p));
  d.y.resize(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    const Eigen::VectorXd x = gauss.draw(rng);
    d.x.row(i) = x.transpose();
    d.y[i] = truth.intercept + x.dot(truth.coefs) + LadDesign::kSigma * lad_noise(design.model, rng);
  }
  return d;
}

Dataset gen_lad(const LadDesign& design) {
  Rng rng(design.seed);
  return draw_lad(design, design.n, rng);
}

// ---------------------------------------------------------------- LASSO

Parameter lasso_truth(std::size_t p) {
  require(p >= 4, "LASSO design needs p >= 4");
  Parameter t = Parameter::zero(p);
  t.coefs.head(4) << 1.0, 2.0, -2.0, 3.0;
  return t;
}

Dataset gen_lasso(const LassoDesign& design) {
  Rng rng(design.seed);
  const Parameter truth = lasso_truth(design.p);
  const GaussianSampler gauss(equicorrelation(design.p, design.rho));
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(design.n), static_cast<Eigen::Index>(design.p));
  d.y.resize(static_cast<Eigen::Index>(design.n));
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    const Eigen::VectorXd x = gauss.draw(rng);
    d.x.row(i) = x.transpose();
    d.y[i] = x.dot(truth.coefs) + rng.normal();
  }
  d.x.rowwise() -= d.x.colwise().mean();
  d.y.array() -= d.y.mean();
  return d;
}

// ---------------------------------------------------------------- population target

TargetResult population_target(const LossModel& model, const Dataset& sample, const TargetSpec& spec) {
  validate(model, sample);
  require(sample.size() > 0, "population_target: empty sample");
  const LossModel plain{model.kind, model.includes_intercept, std::nullopt};
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(sample.size()),
                                                      1.0 / static_cast<double>(sample.size()));
  Parameter current = Parameter::zero(sample.dim());
  TargetResult best{current, weighted_objective(plain, current, sample, w, 0.0), 0, false};
  double reference = best.objective;
  std::size_t last_progress = 0;

  for (std::size_t t = 1; t <= spec.max_iters; ++t) {
    const auto [value, g] = weighted_objective_with_subgrad(plain, current, sample, w, 0.0);
    if (!std::isfinite(value)) throw NumericalError("population_target: non-finite objective at iteration " + std::to_string(t));
    best.iterations = t;
    if (value < best.objective) {
      best.objective = value;
      best.theta0 = current;
    }
    if (best.objective < reference - spec.tol * std::max(std::abs(reference), 1e-12)) {
      reference = best.objective;
      last_progress = t;
    } else if (t - last_progress >= spec.patience) {
      best.converged = true;
      break;
    }
    const double step = spec.lr / std::sqrt(static_cast<double>(t));
    current.intercept -= step * g.intercept;
    current.coefs -= step * g.coefs;
  }
  return best;
}

TargetResult population_target(const LossModel& model, const SvmDesign& design, const TargetSpec& spec) {
  Rng rng(spec.seed);
  return population_target(model, draw_svm(design, spec.samples, rng), spec);
}

TargetResult population_target(const LossModel& model, const LadDesign& design, const TargetSpec& spec) {
  Rng rng(spec.seed);
  return population_target(model, draw_lad(design, spec.samples, rng), spec);
}

}  // namespace deepboot
