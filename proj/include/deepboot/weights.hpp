#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <vector>

#include "deepboot/rng.hpp"

namespace deepboot {

struct DirichletSpec {
  Eigen::VectorXd concentration;
  double scale = 1.0;

  static DirichletSpec symmetric(std::size_t dim, double concentration, double scale);
};

/// scale * (g_1, ..., g_m) / sum(g) with g_i ~ Gamma(concentration_i, 1).
Eigen::VectorXd draw_dirichlet(const DirichletSpec& spec, Rng& rng);

/// Assignment of observations to subgroups. Groups are contiguous blocks of
/// floor(n / S) observations in some order; the last block absorbs the
/// remainder when S does not divide n.
class GroupMap {
 public:
  /// Blocks over the identity order 0..n-1.
  static GroupMap contiguous(std::size_t n, std::size_t groups);
  /// Blocks over a seed-controlled permutation of 0..n-1.
  static GroupMap shuffled(std::size_t n, std::size_t groups, Rng& rng);

  std::size_t size() const { return group_of_.size(); }
  std::size_t groups() const { return groups_; }
  std::size_t group_of(std::size_t i) const { return group_of_[i]; }
  std::vector<std::size_t> group_sizes() const;

  /// Writes compact[group_of(i)] into out[offset + i] for every observation.
  void expand_into(const Eigen::Ref<const Eigen::VectorXd>& compact, Eigen::Ref<Eigen::VectorXd> out) const;

 private:
  GroupMap(std::vector<std::size_t> group_of, std::size_t groups)
      : group_of_(std::move(group_of)), groups_(groups) {}

  std::vector<std::size_t> group_of_;
  std::size_t groups_ = 0;
};

/// A bootstrap weight draw: the subgroup weights fed to the generator and
/// the per-observation weights they expand to (observed block first, then
/// the pseudo-observation block when present).
struct WeightVector {
  Eigen::VectorXd compact;
  Eigen::VectorXd expanded;
};

/// Everything needed to draw and expand weights repeatedly for one dataset.
///
/// Gibbs scheme: compact ~ S * Dir(1, ..., 1) over S observed subgroups.
/// NPL scheme: compact ~ (S + S') * Dir(1, ..., 1, a/n', ..., a/n') over S
/// observed and S' pseudo subgroups. With a = 0 the pseudo block is fixed at
/// zero and the observed block is (S + S') * Dir(1, ..., 1), so the input
/// dimension of a generator does not depend on a.
class WeightScheme {
 public:
  static WeightScheme gibbs(GroupMap observed);
  static WeightScheme npl(GroupMap observed, GroupMap pseudo, double alpha);

  std::size_t compact_dim() const { return spec_.concentration.size(); }
  std::size_t observed_groups() const { return observed_.groups(); }
  std::size_t expanded_dim() const { return observed_.size() + (pseudo_ ? pseudo_->size() : 0); }
  std::size_t observed_size() const { return observed_.size(); }
  bool has_pseudo() const { return pseudo_.has_value(); }
  double alpha() const { return alpha_; }
  const DirichletSpec& dirichlet() const { return spec_; }

  Eigen::VectorXd draw_compact(Rng& rng) const;
  Eigen::VectorXd expand(const Eigen::Ref<const Eigen::VectorXd>& compact) const;
  WeightVector draw(Rng& rng) const;

  /// Column-batched versions: column k is one draw.
  Eigen::MatrixXd draw_compact_batch(std::size_t count, Rng& rng) const;
  Eigen::MatrixXd expand_batch(const Eigen::MatrixXd& compact) const;

 private:
  WeightScheme(GroupMap observed, std::optional<GroupMap> pseudo, DirichletSpec spec, double alpha)
      : observed_(std::move(observed)), pseudo_(std::move(pseudo)), spec_(std::move(spec)), alpha_(alpha) {}

  GroupMap observed_;
  std::optional<GroupMap> pseudo_;
  DirichletSpec spec_;
  double alpha_ = 0.0;
};

/// Gibbs-posterior weights over contiguous subgroups of n observations.
WeightVector gibbs_weights(std::size_t n, std::size_t subgroups, Rng& rng);

/// NPL weights over contiguous subgroups of n observed and n' pseudo observations.
WeightVector npl_weights(std::size_t n, std::size_t n_prime, std::size_t subgroups,
                         std::size_t pseudo_subgroups, double alpha, Rng& rng);

}  // namespace deepboot
