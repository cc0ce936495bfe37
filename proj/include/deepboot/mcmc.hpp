#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "deepboot/dataset.hpp"
#include "deepboot/exact.hpp"
#include "deepboot/losses.hpp"
#include "deepboot/rng.hpp"
#include "deepboot/sample_batch.hpp"

namespace deepboot {

struct McmcConfig {
  std::size_t iterations = 1'000'000;  // per chain, burn-in included
  std::size_t burn_in = 10'000;
  double proposal_sd = 0.0;            // 0: 0.1 when p <= 10, else 0.01
  std::optional<Parameter> init;       // default: penalized optimum
  std::size_t chains = 4;
  std::size_t zero_accept_window = 10'000;
  std::uint64_t seed = 0;
  SolverConfig init_solver;            // used only when `init` is empty
};

double default_proposal_sd(std::size_t p);

struct ChainSummary {
  double acceptance_rate = 0.0;
  Eigen::VectorXd ess;          // per coordinate (beta, theta...), summed over chains
  Eigen::VectorXd split_rhat;   // per coordinate; NaN when undefined
  bool ess_degenerate = false;  // some coordinate never moved
  double seconds = 0.0;
  double seconds_per_10k_ess = 0.0;  // uses the minimum ESS across coordinates
};

struct McmcResult {
  SampleBatch batch;  // retained draws of all chains, chain after chain
  ChainSummary summary;
  std::vector<Eigen::MatrixXd> chains;  // retained draws per chain
};

/// min(1, exp(delta)), computed from the log-density difference only.
double acceptance_probability(double delta_log_density);

/// One random-walk chain on an arbitrary log density. Returns retained
/// (post burn-in) states row by row and the number of accepted proposals.
struct Chain {
  Eigen::MatrixXd states;
  std::size_t accepted = 0;
  std::size_t proposals = 0;
};

Chain random_walk_chain(const std::function<double(const Eigen::VectorXd&)>& log_density, const Eigen::VectorXd& init,
                        double proposal_sd, std::size_t iterations, std::size_t burn_in,
                        std::size_t zero_accept_window, Rng& rng);

/// Gaussian random-walk Metropolis-Hastings on the Gibbs posterior
/// log pi(theta) - alpha sum_i l(theta; x_i). Chain c uses derive_seed(seed, {c}).
McmcResult mh_run(const Dataset& data, const LossModel& model, double alpha, const McmcConfig& cfg);

struct EssResult {
  double value = 0.0;
  bool degenerate = false;  // constant chain
};

/// N / (1 + 2 sum_k rho_k), truncated by Geyer's initial positive sequence,
/// autocorrelations by direct sums up to lag min(N - 1, 10^4); capped at N.
EssResult effective_sample_size(std::span<const double> chain);

struct RhatResult {
  double value = 0.0;
  bool degenerate = false;  // zero within-chain variance
};

/// Split-chain potential scale reduction for one coordinate; needs at least
/// two chains of equal length >= 4.
RhatResult split_rhat(const std::vector<std::vector<double>>& chains);

}  // namespace deepboot
