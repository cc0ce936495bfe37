#include "deepboot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "deepboot/errors.hpp"

namespace deepboot {

double quantile(std::span<const double> values, double q) {
  require(!values.empty(), "quantile: no values");
  require(q >= 0.0 && q <= 1.0, "quantile: q must be in [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double a = v[lo];
  if (hi == lo) return a;
  const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return a + (pos - static_cast<double>(lo)) * (b - a);
}

IntervalReport interval_report(const SampleBatch& batch, const Parameter& theta0, const std::vector<bool>& active_mask,
                               double level) {
  require(batch.size() >= 1, "interval_report: empty batch");
  require(batch.dim() == theta0.dim() + 1, "interval_report: theta0 dimension does not match the draws");
  require(active_mask.size() == theta0.dim(), "interval_report: active mask must cover every coefficient");
  require(level > 0.0 && level < 1.0, "interval_report: level must be in (0, 1)");
  const double tail = (1.0 - level) / 2.0;
  const Eigen::VectorXd truth = theta0.full();

  IntervalReport r;
  for (Eigen::Index j = 0; j < batch.draws.cols(); ++j) {
    const Eigen::VectorXd col = batch.draws.col(j);
    const std::span<const double> v(col.data(), static_cast<std::size_t>(col.size()));
    CoordinateInterval c;
    c.lo = quantile(v, tail);
    c.hi = quantile(v, 1.0 - tail);
    c.mean = col.mean();
    c.length = c.hi - c.lo;
    c.covered = truth[j] >= c.lo && truth[j] <= c.hi;
    c.bias = std::abs(c.mean - truth[j]);
    r.coords.push_back(c);
    if (j == 0) continue;
    if (active_mask[static_cast<std::size_t>(j - 1)]) {
      ++r.active_count;
      r.coverage_active += c.covered;
      r.length_active += c.length;
      r.bias_active += c.bias;
    } else {
      ++r.inactive_count;
      r.coverage_inactive += c.covered;
      r.length_inactive += c.length;
      r.bias_inactive += c.bias;
    }
  }
  if (r.active_count) {
    const auto k = static_cast<double>(r.active_count);
    r.coverage_active /= k;
    r.length_active /= k;
    r.bias_active /= k;
  }
  if (r.inactive_count) {
    const auto k = static_cast<double>(r.inactive_count);
    r.coverage_inactive /= k;
    r.length_inactive /= k;
    r.bias_inactive /= k;
  }
  return r;
}

std::vector<double> ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> r(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

double roc_auc(std::span<const double> scores, std::span<const double> labels) {
  require(scores.size() == labels.size(), "roc_auc: length mismatch");
  const auto r = ranks(scores);
  double pos = 0.0, neg = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 0) {
      pos += 1.0;
      rank_sum += r[i];
    } else {
      neg += 1.0;
    }
  }
  if (pos == 0.0 || neg == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double pr_auc(std::span<const double> scores, std::span<const double> labels) {
  require(scores.size() == labels.size(), "pr_auc: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double total_pos = 0.0;
  for (double l : labels) total_pos += l > 0 ? 1.0 : 0.0;
  if (total_pos == 0.0 || total_pos == static_cast<double>(labels.size())) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double tp = 0.0, fp = 0.0, prev_recall = 0.0, ap = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] > 0 ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / total_pos;
    ap += (recall - prev_recall) * tp / (tp + fp);
    prev_recall = recall;
    i = j;
  }
  return ap;
}

ClassificationReport classification_report(const SampleBatch& batch, const Dataset& test, ScoreKind score) {
  require(batch.size() >= 1, "classification_report: empty batch");
  require(batch.dim() == test.dim() + 1, "classification_report: draw dimension does not match test features");
  // margins(i, k) = beta_k + x_i . theta_k
  Eigen::MatrixXd margins = test.x * batch.draws.rightCols(batch.draws.cols() - 1).transpose();
  margins.rowwise() += batch.draws.col(0).transpose();

  const auto m = static_cast<std::size_t>(test.size());
  std::vector<double> scores(m), labels(test.y.data(), test.y.data() + m);
  double tp = 0, fp = 0, fn = 0, correct = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = margins.row(static_cast<Eigen::Index>(i));
    const double votes = (row.array() > 0.0).cast<double>().sum();
    const double share = votes / static_cast<double>(batch.size());
    const double pred = share >= 0.5 ? 1.0 : -1.0;
    scores[i] = score == ScoreKind::VoteShare ? share : row.mean();
    const double y = labels[i];
    correct += pred == y;
    if (pred > 0 && y > 0) tp += 1;
    if (pred > 0 && y < 0) fp += 1;
    if (pred < 0 && y > 0) fn += 1;
  }
  ClassificationReport r;
  r.accuracy = correct / static_cast<double>(m);
  r.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  r.roc_auc = roc_auc(scores, labels);
  r.pr_auc = pr_auc(scores, labels);
  r.auc_defined = std::isfinite(r.roc_auc);
  return r;
}

namespace {

struct Axis {
  Eigen::VectorXd grid;
  double h;
  bool degenerate;
};

Axis make_axis(const Eigen::VectorXd& v, std::size_t points) {
  const auto n = static_cast<double>(v.size());
  const double mean = v.mean();
  const double sd = std::sqrt((v.array() - mean).square().sum() / std::max(n - 1.0, 1.0));
  Axis a;
  a.degenerate = !(sd > 0.0);
  a.h = a.degenerate ? 1.0 : sd * std::pow(n, -1.0 / 6.0);
  a.grid = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(points), v.minCoeff() - 3.0 * a.h,
                                      v.maxCoeff() + 3.0 * a.h);
  return a;
}

// K(a, i) = phi((grid_a - v_i) / h) / h
Eigen::MatrixXd kernel_matrix(const Axis& axis, const Eigen::VectorXd& v) {
  Eigen::MatrixXd k(axis.grid.size(), v.size());
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * axis.h);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    k.col(i) = ((axis.grid.array() - v[i]) / axis.h).square().unaryExpr([norm](double z) {
      return norm * std::exp(-0.5 * z);
    });
  }
  return k;
}

}  // namespace

KdeGrid kde_2d(const SampleBatch& batch, std::size_t coord_i, std::size_t coord_j, std::size_t grid_x,
               std::size_t grid_y) {
  require(batch.size() >= 30, "kde_2d: need at least 30 draws");
  require(coord_i < batch.dim() && coord_j < batch.dim(), "kde_2d: coordinate out of range");
  require(grid_x >= 2 && grid_y >= 2, "kde_2d: grid needs at least 2 points per axis");
  const Eigen::VectorXd xi = batch.draws.col(static_cast<Eigen::Index>(coord_i));
  const Eigen::VectorXd xj = batch.draws.col(static_cast<Eigen::Index>(coord_j));
  const Axis ax = make_axis(xi, grid_x);
  const Axis ay = make_axis(xj, grid_y);

  KdeGrid g;
  g.xs = ax.grid;
  g.ys = ay.grid;
  g.bandwidth_x = ax.h;
  g.bandwidth_y = ay.h;
  g.degenerate_axis = ax.degenerate || ay.degenerate;
  g.density = kernel_matrix(ax, xi) * kernel_matrix(ay, xj).transpose() / static_cast<double>(xi.size());
  return g;
}

double integrate(const KdeGrid& grid) {
  auto weights = [](const Eigen::VectorXd& axis) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(axis.size());
    for (Eigen::Index a = 0; a + 1 < axis.size(); ++a) {
      const double d = (axis[a + 1] - axis[a]) / 2.0;
      w[a] += d;
      w[a + 1] += d;
    }
    return w;
  };
  return weights(grid.xs).dot(grid.density * weights(grid.ys));
}

std::vector<double> default_log_lambda_grid() {
  std::vector<double> g(20);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -6.0 + 7.0 * static_cast<double>(i) / 19.0;
  return g;
}

BicResult bic_select_lambda(const Dataset& data, const LossModel& family, const std::vector<double>& log_lambdas,
                            const SolverConfig& solver) {
  require(family.kind == LossKind::LAD || family.kind == LossKind::Squared,
          "bic_select_lambda: only LAD and squared-loss families");
  require(!log_lambdas.empty(), "bic_select_lambda: empty grid");
  const auto n = static_cast<double>(data.size());
  std::vector<double> grid = log_lambdas;
  std::sort(grid.begin(), grid.end());
  BicResult out;
  double best = std::numeric_limits<double>::infinity();
  for (double ll : grid) {
    const double lambda = std::exp(ll);
    LossModel model = family;
    model.prior = LaplacePrior{lambda, false};
    const Parameter fit = penalized_optimum(data, model, solver).param;
    const double b = model.includes_intercept ? fit.intercept : 0.0;
    const Eigen::VectorXd r = data.y - (data.x * fit.coefs).array().matrix() - Eigen::VectorXd::Constant(data.y.size(), b);
    const double resid = family.kind == LossKind::LAD ? r.cwiseAbs().mean() : r.squaredNorm() / n;
    const auto df = static_cast<std::size_t>((fit.coefs.array().abs() > 1e-6).count());
    const double bic = n * std::log(resid) + static_cast<double>(df) * std::log(n);
    out.lambdas.push_back(lambda);
    out.bic.push_back(bic);
    out.df.push_back(df);
    if (std::isfinite(bic) && bic < best) {
      best = bic;
      out.lambda = lambda;
    }
  }
  if (!std::isfinite(best)) throw NumericalError("bic_select_lambda: every fit on the grid is degenerate");
  return out;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && a.size() >= 2, "spearman: need two equal-length samples of size >= 2");
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const Eigen::Map<const Eigen::VectorXd> x(ra.data(), static_cast<Eigen::Index>(ra.size()));
  const Eigen::Map<const Eigen::VectorXd> y(rb.data(), static_cast<Eigen::Index>(rb.size()));
  const Eigen::VectorXd xc = x.array() - x.mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  const double denom = std::sqrt(xc.squaredNorm() * yc.squaredNorm());
  return denom > 0.0 ? xc.dot(yc) / denom : 0.0;
}

}  // namespace deepboot
