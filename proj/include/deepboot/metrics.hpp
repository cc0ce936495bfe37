#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "deepboot/dataset.hpp"
#include "deepboot/exact.hpp"
#include "deepboot/losses.hpp"
#include "deepboot/sample_batch.hpp"

namespace deepboot {

/// Linear-interpolation empirical quantile (type 7) of unsorted values.
double quantile(std::span<const double> values, double q);

struct CoordinateInterval {
  double lo = 0.0;
  double hi = 0.0;
  double mean = 0.0;
  double length = 0.0;
  bool covered = false;
  double bias = 0.0;  // |mean - theta0|
};

/// Equal-tailed credible intervals per coordinate and their summaries over
/// active (+) and inactive (-) coefficients. The intercept is reported in
/// `coords[0]` but not included in either group.
struct IntervalReport {
  std::vector<CoordinateInterval> coords;  // (beta, theta_1, ..., theta_p)
  double coverage_active = 0.0, coverage_inactive = 0.0;
  double length_active = 0.0, length_inactive = 0.0;
  double bias_active = 0.0, bias_inactive = 0.0;
  std::size_t active_count = 0, inactive_count = 0;
};

IntervalReport interval_report(const SampleBatch& batch, const Parameter& theta0, const std::vector<bool>& active_mask,
                               double level = 0.90);

enum class ScoreKind { VoteShare, MeanMargin };

struct ClassificationReport {
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
  double roc_auc = 0.0, pr_auc = 0.0;
  bool auc_defined = true;  // false when the test labels are single-class
};

/// Majority vote of sign(beta + x.theta) over draws (ties predict +1);
/// the AUC score is the posterior share of +1 votes or the mean margin.
ClassificationReport classification_report(const SampleBatch& batch, const Dataset& test,
                                           ScoreKind score = ScoreKind::VoteShare);

/// Normalized Mann-Whitney statistic with tie-averaged ranks; labels are +-1.
double roc_auc(std::span<const double> scores, std::span<const double> labels);

/// Average precision over distinct score thresholds (tied scores enter together).
double pr_auc(std::span<const double> scores, std::span<const double> labels);

struct KdeGrid {
  Eigen::VectorXd xs, ys;
  Eigen::MatrixXd density;  // density(a, b) at (xs[a], ys[b])
  double bandwidth_x = 0.0, bandwidth_y = 0.0;
  bool degenerate_axis = false;  // zero-variance axis fell back to unit bandwidth
};

/// Product-Gaussian KDE of two coordinates with Scott's bandwidth
/// sd * N^(-1/6) per axis, on a regular grid spanning the data +- 3 bandwidths.
KdeGrid kde_2d(const SampleBatch& batch, std::size_t coord_i, std::size_t coord_j, std::size_t grid_x = 50,
               std::size_t grid_y = 50);

/// Trapezoid-rule integral of the density grid.
double integrate(const KdeGrid& grid);

struct BicResult {
  double lambda = 0.0;
  std::vector<double> lambdas;
  std::vector<double> bic;
  std::vector<std::size_t> df;
};

/// exp of an equally spaced log-lambda grid from -6 to 1 with 20 points.
std::vector<double> default_log_lambda_grid();

/// Fits the penalized optimum at each lambda and returns the BIC minimizer,
///   LAD:     n log(mean |r|) + df log n
///   Squared: n log(mean r^2) + df log n
/// with df the count of |theta_j| > 1e-6; ties go to the smallest lambda.
BicResult bic_select_lambda(const Dataset& data, const LossModel& family, const std::vector<double>& log_lambdas,
                            const SolverConfig& solver);

/// Spearman rank correlation with tie-averaged ranks.
double spearman(std::span<const double> a, std::span<const double> b);

/// Tie-averaged ranks starting at 1.
std::vector<double> ranks(std::span<const double> values);

}  // namespace deepboot
