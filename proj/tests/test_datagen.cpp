#include <doctest.h>

#include <cmath>

#include "deepboot/datagen.hpp"
#include "deepboot/errors.hpp"

using namespace deepboot;

namespace {

Eigen::MatrixXd correlation(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(x.rows() - 1);
  const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
  return cov.array() / (sd * sd.transpose()).array();
}

Eigen::MatrixXd centered_x(const Dataset& d) {
  Eigen::MatrixXd z = d.x;
  for (Eigen::Index i = 0; i < z.rows(); ++i) z.row(i).array() -= d.y[i];
  return z;
}

}  // namespace

TEST_CASE("covariance builders") {
  const auto e = equicorrelation(3, 0.6);
  CHECK(e(0, 0) == 1.0);
  CHECK(e(1, 2) == 0.6);
  const auto t = toeplitz(4, 0.5);
  CHECK(t(0, 3) == 0.125);
  CHECK(t(2, 1) == 0.5);
  for (std::size_t p : {2, 8, 10, 50, 100, 500}) {
    CHECK_NOTHROW(GaussianSampler(equicorrelation(p, 0.6)));
    CHECK_NOTHROW(GaussianSampler(toeplitz(p, 0.5)));
  }
  const GaussianSampler s(toeplitz(5, 0.5));
  CHECK((s.factor() * s.factor().transpose() - toeplitz(5, 0.5)).norm() < 1e-12);
  CHECK(s.factor().isLowerTriangular());
}

TEST_CASE("SVM design: rho = 0 gives iid standard normal noise") {
  Rng rng(1);
  const Dataset d = draw_svm({10000, 10, 0.0}, 10000, rng);
  const Eigen::MatrixXd z = centered_x(d);
  const auto corr = correlation(z);
  CHECK((corr - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() < 0.05);
  // mean within 3 standard errors, variance within 3 standard errors (sd of s^2 is sqrt(2/n))
  CHECK(z.colwise().mean().cwiseAbs().maxCoeff() < 3 / std::sqrt(10000.0));
  const Eigen::VectorXd var = (z.rowwise() - z.colwise().mean()).colwise().squaredNorm() / 9999.0;
  CHECK((var.array() - 1).abs().maxCoeff() < 3 * std::sqrt(2.0 / 10000));
  CHECK(std::abs(d.y.mean()) < 0.05);
  CHECK((d.y.array().abs() == 1.0).all());
}

TEST_CASE("SVM design: rho = 0.6 pairwise correlation") {
  Rng rng(2);
  const Dataset d = draw_svm({10000, 10, 0.6}, 10000, rng);
  const auto corr = correlation(centered_x(d));
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < i; ++j) CHECK(std::abs(corr(i, j) - 0.6) < 0.05);
}

TEST_CASE("SVM generator sizes and determinism") {
  const SvmDesign design{50, 10, 0.6, 1.0, 100, 77};
  const auto a = gen_svm(design), b = gen_svm(design);
  CHECK(a.train.size() == 50);
  CHECK(a.test.size() == 100);
  CHECK(a.train.x == b.train.x);
  CHECK(a.test.y == b.test.y);
  auto other = design;
  other.seed = 78;
  CHECK(gen_svm(other).train.x != a.train.x);
}

TEST_CASE("SVM prior pseudo data") {
  Rng rng(3);
  const auto observed = gen_svm({50, 4, 0.6, 1.0, 100, 3}).train;
  const Dataset pseudo = svm_prior_pseudo(observed, 10000, rng);
  CHECK(std::abs((pseudo.y.array() > 0).cast<double>().mean() - 0.5) < 0.02);
  for (Eigen::Index i = 0; i < 50; ++i) {  // every pseudo row is an observed row
    bool found = false;
    for (Eigen::Index j = 0; j < 50 && !found; ++j) found = pseudo.x.row(i) == observed.x.row(j);
    CHECK(found);
  }
}

TEST_CASE("LAD noise moments") {
  Rng rng(4);
  const int n = 1000000;
  for (auto model : {LadModel::M1_large_outliers, LadModel::M2_laplace}) {
    double m1 = 0, m2 = 0, m4 = 0;
    for (int i = 0; i < n; ++i) {
      const double e = lad_noise(model, rng);
      m1 += e;
      m2 += e * e;
      m4 += e * e * e * e;
    }
    m1 /= n;
    m2 /= n;
    m4 /= n;
    CHECK(m2 >= 0.98);
    CHECK(m2 <= 1.02);
    CHECK(std::abs(m1) < 0.01);
    if (model == LadModel::M2_laplace) CHECK(m4 / (m2 * m2) == doctest::Approx(6.0).epsilon(0.05));
    // mixture: E v^4 = 3 (0.9 + 0.1 * 225^2), kurtosis = that / 23.4^2
    if (model == LadModel::M1_large_outliers) CHECK(m4 / (m2 * m2) == doctest::Approx(3 * (0.9 + 0.1 * 225 * 225) / (23.4 * 23.4)).epsilon(0.1));
  }
}

TEST_CASE("LAD design truth and sparsity") {
  const auto truth = lad_truth(8);
  CHECK(truth.intercept == 1.0);
  CHECK(truth.coefs.head(3) == Eigen::Vector3d(1.5, 2.0, 3.0));
  CHECK(truth.coefs.tail(5).isZero());

  const Dataset d = gen_lad({10000, 8, LadModel::M2_laplace, 5});
  CHECK(d.size() == 10000);
  // inactive columns carry no signal beyond their correlation with x_3 through the Toeplitz chain;
  // residual after removing the true fit is independent of x
  const Eigen::VectorXd resid = d.y.array() - 1.0 - (d.x * truth.coefs).array();
  CHECK(std::abs(resid.mean()) < 3 * 9.67 / 100);
  const Eigen::VectorXd coef = d.x.colPivHouseholderQr().solve(resid);
  CHECK(coef.cwiseAbs().maxCoeff() < 4 * 9.67 / 100);
  const auto again = gen_lad({10000, 8, LadModel::M2_laplace, 5});
  CHECK(again.y == d.y);
  CHECK(lad_model_from_string(to_string(LadModel::M1_large_outliers)) == LadModel::M1_large_outliers);
  CHECK_THROWS_AS(lad_model_from_string("M3"), ContractError);
}

TEST_CASE("LASSO design") {
  const Dataset d = gen_lasso({1000, 50, 0.6, 9});
  CHECK(d.size() == 1000);
  CHECK(d.dim() == 50);
  CHECK(std::abs(d.y.mean()) < 1e-12);
  CHECK(d.x.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::VectorXd ols = d.x.colPivHouseholderQr().solve(d.y);
  const auto truth = lasso_truth(50);
  CHECK((ols - truth.coefs).cwiseAbs().maxCoeff() < 0.2);
}

TEST_CASE("population target: LAD recovers the truth") {
  TargetSpec spec;
  spec.samples = 200000;
  for (auto model : {LadModel::M1_large_outliers, LadModel::M2_laplace}) {
    const auto r = population_target(LossModel::lad(), LadDesign{100, 8, model, 0}, spec);
    const auto truth = lad_truth(8);
    CHECK(std::abs(r.theta0.intercept - truth.intercept) < 0.1);
    CHECK((r.theta0.coefs - truth.coefs).cwiseAbs().maxCoeff() < 0.1);
  }
}

TEST_CASE("population target: SVM exchangeable coordinates") {
  TargetSpec spec;
  spec.samples = 200000;
  const auto r = population_target(LossModel::hinge(), SvmDesign{50, 10, 0.6}, spec);
  CHECK(std::abs(r.theta0.intercept) < 0.05);
  const double mean = r.theta0.coefs.mean();
  CHECK((r.theta0.coefs.array() - mean).abs().maxCoeff() < 0.03);
  CHECK(mean == doctest::Approx(0.2).epsilon(0.15));
}
