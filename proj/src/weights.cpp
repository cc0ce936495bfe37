#include "deepboot/weights.hpp"

#include <cmath>
#include <numeric>

#include "deepboot/errors.hpp"

namespace deepboot {

DirichletSpec DirichletSpec::symmetric(std::size_t dim, double concentration, double scale) {
  return {Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), concentration), scale};
}

Eigen::VectorXd draw_dirichlet(const DirichletSpec& spec, Rng& rng) {
  require(spec.concentration.size() > 0, "draw_dirichlet: empty concentration vector");
  require(spec.scale > 0.0, "draw_dirichlet: scale must be positive");
  Eigen::VectorXd g(spec.concentration.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double a = spec.concentration[i];
    require(a > 0.0 && std::isfinite(a), "draw_dirichlet: concentrations must be positive");
    g[i] = rng.gamma(a);
  }
  if (g.size() == 1) return Eigen::VectorXd::Constant(1, spec.scale);
  return g * (spec.scale / g.sum());
}

GroupMap GroupMap::contiguous(std::size_t n, std::size_t groups) {
  require(groups >= 1, "GroupMap: need at least one group");
  require(groups <= n, "GroupMap: more subgroups (" + std::to_string(groups) + ") than observations (" +
                           std::to_string(n) + ")");
  const std::size_t block = n / groups;
  std::vector<std::size_t> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = std::min(i / block, groups - 1);
  return {std::move(g), groups};
}

GroupMap GroupMap::shuffled(std::size_t n, std::size_t groups, Rng& rng) {
  GroupMap base = contiguous(n, groups);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::size_t> g(n);
  for (std::size_t pos = 0; pos < n; ++pos) g[order[pos]] = base.group_of_[pos];
  return {std::move(g), groups};
}

std::vector<std::size_t> GroupMap::group_sizes() const {
  std::vector<std::size_t> sizes(groups_, 0);
  for (auto g : group_of_) ++sizes[g];
  return sizes;
}

void GroupMap::expand_into(const Eigen::Ref<const Eigen::VectorXd>& compact, Eigen::Ref<Eigen::VectorXd> out) const {
  for (std::size_t i = 0; i < group_of_.size(); ++i) out[static_cast<Eigen::Index>(i)] = compact[static_cast<Eigen::Index>(group_of_[i])];
}

WeightScheme WeightScheme::gibbs(GroupMap observed) {
  const auto s = observed.groups();
  auto spec = DirichletSpec::symmetric(s, 1.0, static_cast<double>(s));
  return WeightScheme(std::move(observed), std::nullopt, std::move(spec), 0.0);
}

WeightScheme WeightScheme::npl(GroupMap observed, GroupMap pseudo, double alpha) {
  require(alpha >= 0.0 && std::isfinite(alpha), "npl weights: alpha must be nonnegative");
  const auto s = static_cast<Eigen::Index>(observed.groups());
  const auto sp = static_cast<Eigen::Index>(pseudo.groups());
  DirichletSpec spec;
  spec.scale = static_cast<double>(s + sp);
  spec.concentration = Eigen::VectorXd::Ones(s + sp);
  spec.concentration.tail(sp).setConstant(alpha / static_cast<double>(pseudo.size()));
  return WeightScheme(std::move(observed), std::move(pseudo), std::move(spec), alpha);
}

Eigen::VectorXd WeightScheme::draw_compact(Rng& rng) const {
  if (!pseudo_ || alpha_ > 0.0) return draw_dirichlet(spec_, rng);
  // alpha = 0: Bayesian bootstrap over the observed block only.
  const auto s = static_cast<Eigen::Index>(observed_.groups());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(spec_.concentration.size());
  out.head(s) = draw_dirichlet(DirichletSpec::symmetric(static_cast<std::size_t>(s), 1.0, spec_.scale), rng);
  return out;
}

Eigen::VectorXd WeightScheme::expand(const Eigen::Ref<const Eigen::VectorXd>& compact) const {
  require(compact.size() == static_cast<Eigen::Index>(compact_dim()), "WeightScheme::expand: compact length mismatch");
  Eigen::VectorXd out(static_cast<Eigen::Index>(expanded_dim()));
  const auto s = static_cast<Eigen::Index>(observed_.groups());
  observed_.expand_into(compact.head(s), out.head(static_cast<Eigen::Index>(observed_.size())));
  if (pseudo_) {
    pseudo_->expand_into(compact.tail(compact.size() - s), out.tail(static_cast<Eigen::Index>(pseudo_->size())));
  }
  return out;
}

WeightVector WeightScheme::draw(Rng& rng) const {
  WeightVector w;
  w.compact = draw_compact(rng);
  w.expanded = expand(w.compact);
  return w;
}

Eigen::MatrixXd WeightScheme::draw_compact_batch(std::size_t count, Rng& rng) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(compact_dim()), static_cast<Eigen::Index>(count));
  for (Eigen::Index k = 0; k < out.cols(); ++k) out.col(k) = draw_compact(rng);
  return out;
}

Eigen::MatrixXd WeightScheme::expand_batch(const Eigen::MatrixXd& compact) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(expanded_dim()), compact.cols());
  for (Eigen::Index k = 0; k < compact.cols(); ++k) out.col(k) = expand(compact.col(k));
  return out;
}

WeightVector gibbs_weights(std::size_t n, std::size_t subgroups, Rng& rng) {
  return WeightScheme::gibbs(GroupMap::contiguous(n, subgroups)).draw(rng);
}

WeightVector npl_weights(std::size_t n, std::size_t n_prime, std::size_t subgroups, std::size_t pseudo_subgroups,
                         double alpha, Rng& rng) {
  return WeightScheme::npl(GroupMap::contiguous(n, subgroups), GroupMap::contiguous(n_prime, pseudo_subgroups), alpha)
      .draw(rng);
}

}  // namespace deepboot
