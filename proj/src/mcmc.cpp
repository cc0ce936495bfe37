#include "deepboot/mcmc.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "deepboot/errors.hpp"
#include "deepboot/parallel.hpp"

namespace deepboot {

double default_proposal_sd(std::size_t p) { return p <= 10 ? 0.1 : 0.01; }

double acceptance_probability(double delta_log_density) {
  if (std::isnan(delta_log_density)) return 0.0;
  return delta_log_density >= 0.0 ? 1.0 : std::exp(delta_log_density);
}

Chain random_walk_chain(const std::function<double(const Eigen::VectorXd&)>& log_density, const Eigen::VectorXd& init,
                        double proposal_sd, std::size_t iterations, std::size_t burn_in,
                        std::size_t zero_accept_window, Rng& rng) {
  require(proposal_sd > 0.0, "MH: proposal sd must be positive");
  require(burn_in < iterations, "MH: burn_in must be smaller than iterations");
  Eigen::VectorXd current = init;
  double current_ld = log_density(current);
  require(std::isfinite(current_ld), "MH: log density is not finite at the initial state");

  Chain chain;
  chain.states.resize(static_cast<Eigen::Index>(iterations - burn_in), init.size());
  std::size_t accepted_after_burn = 0;
  Eigen::VectorXd proposal(init.size());
  for (std::size_t it = 0; it < iterations; ++it) {
    for (Eigen::Index j = 0; j < proposal.size(); ++j) proposal[j] = current[j] + proposal_sd * rng.normal();
    const double ld = log_density(proposal);
    const double delta = ld - current_ld;
    // log(u) < delta is u < min(1, exp(delta)) without forming exp of either density.
    if (delta >= 0.0 || std::log(rng.uniform()) < delta) {
      current.swap(proposal);
      current_ld = ld;
      ++chain.accepted;
      if (it >= burn_in) ++accepted_after_burn;
    }
    ++chain.proposals;
    if (it >= burn_in) {
      const std::size_t kept = it - burn_in;
      chain.states.row(static_cast<Eigen::Index>(kept)) = current.transpose();
      if (kept + 1 == zero_accept_window && accepted_after_burn == 0) {
        throw NumericalError("MH: no proposal accepted in the first " + std::to_string(zero_accept_window) +
                             " post burn-in steps; reduce the proposal sd (currently " + std::to_string(proposal_sd) +
                             ")");
      }
    }
  }
  return chain;
}

McmcResult mh_run(const Dataset& data, const LossModel& model, double alpha, const McmcConfig& cfg) {
  validate(model, data);
  require(alpha > 0.0, "mh_run: alpha must be positive");
  require(cfg.chains >= 1, "mh_run: need at least one chain");
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t p = data.dim();
  const double sd = cfg.proposal_sd > 0.0 ? cfg.proposal_sd : default_proposal_sd(p);
  const Parameter init = cfg.init ? *cfg.init : penalized_optimum(data, model, cfg.init_solver).param;
  const Eigen::VectorXd init_packed = model.pack(init);

  auto log_density = [&](const Eigen::VectorXd& packed) {
    return gibbs_log_density(model, model.unpack(packed), data, alpha);
  };

  McmcResult result;
  std::vector<Chain> chains(cfg.chains);
  parallel_for(cfg.chains, [&](std::size_t c) {
    Rng rng(derive_seed(cfg.seed, {c}));
    chains[c] = random_walk_chain(log_density, init_packed, sd, cfg.iterations, cfg.burn_in, cfg.zero_accept_window, rng);
  });

  const auto retained = static_cast<Eigen::Index>(cfg.iterations - cfg.burn_in);
  result.batch.method = Method::MCMC;
  result.batch.draws.resize(retained * static_cast<Eigen::Index>(cfg.chains), static_cast<Eigen::Index>(p + 1));
  std::size_t accepted = 0, proposals = 0;
  for (std::size_t c = 0; c < cfg.chains; ++c) {
    Eigen::MatrixXd full(retained, static_cast<Eigen::Index>(p + 1));
    if (model.includes_intercept) {
      full = chains[c].states;
    } else {
      full.col(0).setZero();
      full.rightCols(static_cast<Eigen::Index>(p)) = chains[c].states;
    }
    result.batch.draws.middleRows(static_cast<Eigen::Index>(c) * retained, retained) = full;
    result.chains.push_back(std::move(full));
    accepted += chains[c].accepted;
    proposals += chains[c].proposals;
  }

  ChainSummary& s = result.summary;
  s.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(proposals);
  s.ess = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p + 1));
  s.split_rhat = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(p + 1), std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index j = 0; j <= static_cast<Eigen::Index>(p); ++j) {
    if (j == 0 && !model.includes_intercept) continue;
    std::vector<std::vector<double>> per_chain;
    for (const auto& ch : result.chains) {
      std::vector<double> v(ch.col(j).data(), ch.col(j).data() + ch.rows());
      const EssResult e = effective_sample_size(v);
      s.ess[j] += e.value;
      s.ess_degenerate = s.ess_degenerate || e.degenerate;
      per_chain.push_back(std::move(v));
    }
    if (cfg.chains >= 2 && retained >= 4) {
      const RhatResult r = split_rhat(per_chain);
      if (!r.degenerate) s.split_rhat[j] = r.value;
    }
  }
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const Eigen::Index first = model.includes_intercept ? 0 : 1;
  const double min_ess = s.ess.tail(s.ess.size() - first).minCoeff();
  s.seconds_per_10k_ess = min_ess > 0.0 ? s.seconds * 1e4 / min_ess : std::numeric_limits<double>::infinity();
  result.batch.sample_seconds = s.seconds;
  return result;
}

EssResult effective_sample_size(std::span<const double> chain) {
  const std::size_t n = chain.size();
  require(n >= 10, "effective_sample_size: chain must have at least 10 draws");
  double mean = 0.0;
  for (double v : chain) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> c(n);
  double gamma0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    c[i] = chain[i] - mean;
    gamma0 += c[i] * c[i];
  }
  gamma0 /= static_cast<double>(n);
  if (gamma0 <= 0.0) return {1.0, true};

  const std::size_t max_lag = std::min<std::size_t>(n - 1, 10'000);
  auto rho = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += c[i] * c[i + lag];
    return s / static_cast<double>(n) / gamma0;
  };
  // tau = -1 + 2 * sum_m (rho_2m + rho_2m+1) over the initial positive pairs.
  double tau = -1.0;
  for (std::size_t lag = 0; lag + 1 <= max_lag; lag += 2) {
    const double pair = (lag == 0 ? 1.0 : rho(lag)) + rho(lag + 1);
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  const double ess = static_cast<double>(n) / std::max(tau, 1e-12);
  return {std::min(ess, static_cast<double>(n)), false};
}

RhatResult split_rhat(const std::vector<std::vector<double>>& chains) {
  require(chains.size() >= 2, "split_rhat: need at least two chains");
  const std::size_t len = chains.front().size();
  for (const auto& c : chains) require(c.size() == len, "split_rhat: chains must have equal length");
  require(len >= 4, "split_rhat: chains must have at least 4 draws");

  const std::size_t half = len / 2;
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    for (std::size_t part = 0; part < 2; ++part) {
      // Odd lengths drop the middle draw.
      const std::size_t start = part == 0 ? 0 : len - half;
      double m = 0.0;
      for (std::size_t i = 0; i < half; ++i) m += c[start + i];
      m /= static_cast<double>(half);
      double v = 0.0;
      for (std::size_t i = 0; i < half; ++i) v += (c[start + i] - m) * (c[start + i] - m);
      means.push_back(m);
      vars.push_back(v / static_cast<double>(half - 1));
    }
  }
  const auto m = static_cast<double>(means.size());
  const auto n = static_cast<double>(half);
  double grand = 0.0;
  for (double v : means) grand += v;
  grand /= m;
  double b = 0.0;
  for (double v : means) b += (v - grand) * (v - grand);
  b *= n / (m - 1.0);
  double w = 0.0;
  for (double v : vars) w += v;
  w /= m;
  if (w <= 0.0) return {std::numeric_limits<double>::quiet_NaN(), true};
  const double var_plus = (n - 1.0) / n * w + b / n;
  return {std::sqrt(var_plus / w), false};
}

}  // namespace deepboot
