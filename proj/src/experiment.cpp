#include "deepboot/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "deepboot/csv.hpp"
#include "deepboot/errors.hpp"
#include "deepboot/metrics.hpp"
#include "deepboot/parallel.hpp"

namespace deepboot {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ------------------------------------------------------------------ config I/O

std::string batch_mode_name(BatchMode m) { return m == BatchMode::Full ? "full" : "stochastic"; }

BatchMode batch_mode_from_string(const std::string& s) {
  if (s == "full") return BatchMode::Full;
  if (s == "stochastic") return BatchMode::Stochastic;
  throw ContractError("unknown batch_mode '" + s + "'");
}

/// Reads known keys of one JSON object and rejects the rest.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ContractError("config: '" + where_ + "' must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ContractError("config: bad value for '" + where_ + key + "': " + e.what());
    }
  }

  const json* section(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  std::string path(const std::string& key) const { return where_ + key + "."; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ContractError("config: unknown key '" + where_ + item.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

// ------------------------------------------------------------------ helpers

std::string fmt(double v) { return format_double(v); }

std::string slug(const std::string& setting) {
  std::string s;
  for (char c : setting) s += (c == ';' ? '_' : (c == '=' ? '-' : c));
  return s;
}

std::vector<bool> lad_active_mask(std::size_t p) {
  std::vector<bool> mask(p, false);
  for (std::size_t j = 0; j < std::min(p, LadDesign::kActive); ++j) mask[j] = true;
  return mask;
}

Eigen::RowVectorXd column_means(const SampleBatch& b) { return b.draws.colwise().mean(); }

/// Rows and artifacts produced by one replication.
struct RepOutput {
  std::vector<ResultRow> results;
  std::vector<ResultRow> timings;
  std::vector<PathRow> path;
  std::vector<std::string> artifacts;
  ReplicationRecord record;
};

class Replication {
 public:
  Replication(const ExperimentConfig& cfg, std::size_t rep, bool write_files)
      : cfg_(cfg), rep_(rep), write_(write_files) {
    out_.record.replication = rep;
    out_.record.data_seed = data_seed(cfg.master_seed, rep);
    for (Method m : cfg.methods) out_.record.method_seeds[to_string(m)] = method_seed(cfg.master_seed, rep, m);
  }

  std::uint64_t seed(Method m) const { return method_seed(cfg_.master_seed, rep_, m); }
  std::uint64_t data_seed_value() const { return out_.record.data_seed; }

  void result(const std::string& setting, Method m, const std::string& metric, double value) {
    out_.results.push_back({to_string(cfg_.experiment), setting, rep_, seed(m), m, metric, value});
  }
  void timing(const std::string& setting, Method m, const std::string& metric, double value) {
    out_.timings.push_back({to_string(cfg_.experiment), setting, rep_, seed(m), m, metric, value});
  }
  void stage(const std::string& name, double seconds) { out_.record.stage_seconds[name] += seconds; }
  void error(const std::string& what) { out_.record.errors.push_back(what); }
  void path(PathRow row) { out_.path.push_back(row); }

  bool writing() const { return write_; }
  std::size_t index() const { return rep_; }

  /// Registers and returns the absolute path of an artifact under the output dir.
  fs::path artifact(const std::string& relative) {
    out_.artifacts.push_back(relative);
    const fs::path full = fs::path(cfg_.output_dir) / relative;
    fs::create_directories(full.parent_path());
    return full;
  }

  void interval_rows(const std::string& setting, Method m, const IntervalReport& r) {
    if (r.active_count > 0) {
      result(setting, m, "coverage_active", r.coverage_active);
      result(setting, m, "length_active", r.length_active);
      result(setting, m, "bias_active", r.bias_active);
    }
    if (r.inactive_count > 0) {
      result(setting, m, "coverage_inactive", r.coverage_inactive);
      result(setting, m, "length_inactive", r.length_inactive);
      result(setting, m, "bias_inactive", r.bias_inactive);
    }
  }

  /// Runs `body` for one method, recording a failure instead of propagating it.
  template <typename F>
  void guarded(const std::string& setting, Method m, F&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      error(setting + " " + to_string(m) + ": " + e.what());
    }
  }

  void save_batch(const std::string& setting, const SampleBatch& b, const std::string& tag = "") {
    if (!write_ || !cfg_.save_draws) return;
    const std::string stem = slug(setting) + tag + "_rep" + std::to_string(rep_) + "_" + to_string(b.method);
    write_sample_batch_csv(artifact("draws/" + stem + ".csv"), b);
    if (rep_ == 0 && b.size() >= 30 && b.dim() >= 3) {
      write_kde_csv(artifact("kde/" + stem + "_theta1_theta2.csv"), kde_2d(b, 1, 2));
    }
  }

  void save_sampler(const std::string& setting, const DeepBootstrapSampler& s, std::uint64_t weight_seed,
                    const std::string& tag = "") {
    if (!write_) return;
    const std::string stem = slug(setting) + tag + "_rep" + std::to_string(rep_);
    write_trace_csv(artifact("traces/" + stem + "_dbs_trace.csv"), s.trace);
    if (cfg_.save_draws) save_checkpoint(artifact("checkpoints/" + stem + "_dbs.json"), s.net, s.optimizer);
    if (cfg_.dump_weights > 0) {
      Rng rng(weight_seed);
      write_weights_csv(artifact("weights/" + stem + "_weights.csv"),
                        s.scheme.draw_compact_batch(cfg_.dump_weights, rng).transpose());
    }
  }

  void save_mcmc(const std::string& setting, const McmcResult& r) {
    if (!write_) return;
    const std::string stem = slug(setting) + "_rep" + std::to_string(rep_);
    json j;
    j["acceptance_rate"] = r.summary.acceptance_rate;
    j["ess"] = std::vector<double>(r.summary.ess.data(), r.summary.ess.data() + r.summary.ess.size());
    std::vector<json> rhat;
    for (Eigen::Index i = 0; i < r.summary.split_rhat.size(); ++i) {
      const double v = r.summary.split_rhat[i];
      rhat.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    }
    j["split_rhat"] = rhat;
    j["ess_degenerate"] = r.summary.ess_degenerate;
    j["seconds"] = r.summary.seconds;
    j["seconds_per_10k_ess"] = r.summary.seconds_per_10k_ess;
    std::ofstream(artifact("mcmc/" + stem + "_summary.json")) << j.dump(2) << '\n';
    if (cfg_.save_draws) write_chain_csv(artifact("mcmc/" + stem + "_chains.csv"), r.chains);
  }

  RepOutput take() { return std::move(out_); }

 private:
  const ExperimentConfig& cfg_;
  std::size_t rep_;
  bool write_;
  RepOutput out_;
};

// ------------------------------------------------------------------ shared method runners

SampleBatch run_dbs_gibbs(Replication& r, const std::string& setting, const Dataset& data, const LossModel& model,
                          DbsConfig dbs, std::size_t draws, std::uint64_t seed, const std::string& tag = "") {
  dbs.seed = derive_seed(seed, {0});
  const DeepBootstrapSampler s = train_gibbs(data, model, dbs);
  Rng rng(derive_seed(seed, {1}));
  SampleBatch b = sample(s, draws, rng);
  r.stage("DBS_train", s.train_seconds);
  r.stage("DBS_sample", b.sample_seconds);
  r.save_sampler(setting, s, derive_seed(seed, {2}), tag);
  return b;
}

void dbs_timing(Replication& r, const std::string& setting, const SampleBatch& b) {
  r.timing(setting, Method::DBS, "train_seconds", b.train_seconds);
  r.timing(setting, Method::DBS, "sample_seconds", b.sample_seconds);
  r.timing(setting, Method::DBS, "sample_seconds_per_draw", b.sample_seconds / static_cast<double>(b.size()));
}

void wlb_timing(Replication& r, const std::string& setting, const SampleBatch& b) {
  r.stage("WLB", b.sample_seconds);
  r.timing(setting, Method::WLB, "total_seconds", b.sample_seconds);
  r.timing(setting, Method::WLB, "seconds_per_draw", b.sample_seconds / static_cast<double>(b.size()));
}

McmcConfig mcmc_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  McmcConfig m = cfg.mcmc;
  m.seed = seed;
  m.init_solver = cfg.solver;
  return m;
}

void mcmc_rows(Replication& r, const std::string& setting, const McmcResult& res) {
  r.stage("MCMC", res.summary.seconds);
  r.result(setting, Method::MCMC, "acceptance_rate", res.summary.acceptance_rate);
  r.result(setting, Method::MCMC, "min_ess", res.summary.ess.tail(res.summary.ess.size() - 1).minCoeff());
  double worst = 0.0;
  for (Eigen::Index j = 1; j < res.summary.split_rhat.size(); ++j)
    if (std::isfinite(res.summary.split_rhat[j])) worst = std::max(worst, res.summary.split_rhat[j]);
  if (worst > 0.0) r.result(setting, Method::MCMC, "max_split_rhat", worst);
  r.timing(setting, Method::MCMC, "total_seconds", res.summary.seconds);
  r.timing(setting, Method::MCMC, "seconds_per_10k_ess", res.summary.seconds_per_10k_ess);
  r.save_mcmc(setting, res);
}

double lad_lambda(Replication& r, const ExperimentConfig& cfg, const Dataset& data) {
  if (cfg.lambda) return *cfg.lambda;
  const auto t0 = Clock::now();
  const double lambda = bic_select_lambda(data, LossModel::lad(), default_log_lambda_grid(), cfg.solver).lambda;
  r.stage("BIC", seconds_since(t0));
  return lambda;
}

/// DBS (Algorithm 1), WLB and MCMC on one penalized LAD problem, with interval rows.
void run_lad_methods(Replication& r, const ExperimentConfig& cfg, const std::string& setting, const Dataset& data,
                     const LossModel& model, const Parameter& theta0, const std::vector<bool>& mask,
                     std::vector<std::pair<Method, Eigen::RowVectorXd>>* means = nullptr,
                     std::optional<double> lambda = std::nullopt) {
  for (Method m : cfg.methods) {
    r.guarded(setting, m, [&] {
      SampleBatch b;
      if (m == Method::DBS) {
        b = run_dbs_gibbs(r, setting, data, model, cfg.dbs, cfg.draws, r.seed(m));
        dbs_timing(r, setting, b);
      } else if (m == Method::WLB) {
        b = wlb_sample(data, model, cfg.wlb_draws, cfg.solver, r.seed(m));
        wlb_timing(r, setting, b);
      } else {
        const McmcResult res = mh_run(data, model, 1.0, mcmc_config(cfg, r.seed(m)));
        mcmc_rows(r, setting, res);
        b = res.batch;
      }
      const auto t0 = Clock::now();
      if (lambda) r.result(setting, m, "lambda", *lambda);
      r.interval_rows(setting, m, interval_report(b, theta0, mask, cfg.level));
      if (means) means->emplace_back(m, column_means(b));
      r.save_batch(setting, b);
      r.stage("metrics", seconds_since(t0));
    });
  }
}

// ------------------------------------------------------------------ experiments

std::string svm_setting(const ExperimentConfig& cfg) {
  return "n=" + std::to_string(cfg.design.n) + ";p=" + std::to_string(cfg.design.p) + ";rho=" + fmt(cfg.design.rho);
}

std::string lad_setting(std::size_t n, std::size_t p, LadModel model) {
  return "n=" + std::to_string(n) + ";p=" + std::to_string(p) + ";model=" + to_string(model);
}

void run_svm(Replication& r, const ExperimentConfig& cfg, const Parameter& theta0) {
  const std::string setting = svm_setting(cfg);
  auto t0 = Clock::now();
  const SvmDesign design{cfg.design.n, cfg.design.p, cfg.design.rho, cfg.design.signal, cfg.design.test_size,
                         r.data_seed_value()};
  const SvmData data = gen_svm(design);
  r.stage("data", seconds_since(t0));
  const std::size_t n_prime = cfg.dbs.n_prime > 0 ? cfg.dbs.n_prime : data.train.size();
  const std::vector<bool> mask(cfg.design.p, true);
  const LossModel model = LossModel::hinge();
  const PseudoSource source = [&](std::size_t m, Rng& rng) { return svm_prior_pseudo(data.train, m, rng); };

  for (Method m : cfg.methods) {
    r.guarded(setting, m, [&] {
      SampleBatch b;
      if (m == Method::DBS) {
        Rng prior_rng(derive_seed(r.seed(m), {3}));
        const Dataset pseudo = svm_prior_pseudo(data.train, n_prime, prior_rng);
        DbsConfig dbs = cfg.dbs;
        dbs.seed = derive_seed(r.seed(m), {0});
        const DeepBootstrapSampler s = train_npl(data.train, pseudo, model, dbs);
        Rng rng(derive_seed(r.seed(m), {1}));
        b = sample(s, cfg.draws, rng);
        r.stage("DBS_train", s.train_seconds);
        r.stage("DBS_sample", b.sample_seconds);
        r.save_sampler(setting, s, derive_seed(r.seed(m), {2}));
        dbs_timing(r, setting, b);
      } else if (m == Method::WLB) {
        b = npl_sample(data.train, model, source, cfg.dbs.alpha, n_prime, cfg.wlb_draws, cfg.solver, r.seed(m));
        wlb_timing(r, setting, b);
      } else {
        const McmcResult res = mh_run(data.train, model, 1.0, mcmc_config(cfg, r.seed(m)));
        mcmc_rows(r, setting, res);
        b = res.batch;
      }
      const auto t1 = Clock::now();
      const ClassificationReport c = classification_report(b, data.test);
      r.result(setting, m, "accuracy", c.accuracy);
      r.result(setting, m, "precision", c.precision);
      r.result(setting, m, "recall", c.recall);
      r.result(setting, m, "f1", c.f1);
      if (c.auc_defined) {
        r.result(setting, m, "roc_auc", c.roc_auc);
        r.result(setting, m, "pr_auc", c.pr_auc);
      }
      r.interval_rows(setting, m, interval_report(b, theta0, mask, cfg.level));
      r.save_batch(setting, b);
      r.stage("metrics", seconds_since(t1));
    });
  }
}

void run_lad(Replication& r, const ExperimentConfig& cfg) {
  const std::string setting = lad_setting(cfg.design.n, cfg.design.p, cfg.design.model);
  auto t0 = Clock::now();
  const Dataset data = gen_lad({cfg.design.n, cfg.design.p, cfg.design.model, r.data_seed_value()});
  r.stage("data", seconds_since(t0));
  double lambda = 0.0;
  try {
    lambda = lad_lambda(r, cfg, data);
  } catch (const std::exception& e) {
    r.error(setting + " BIC: " + e.what());
    return;
  }
  run_lad_methods(r, cfg, setting, data, LossModel::lad(LaplacePrior{lambda}), lad_truth(cfg.design.p),
                  lad_active_mask(cfg.design.p), nullptr, lambda);
}

constexpr std::size_t kPathCoords = 4;

void run_lasso(Replication& r, const ExperimentConfig& cfg) {
  auto t0 = Clock::now();
  const Dataset data = gen_lasso({cfg.design.n, cfg.design.p, cfg.design.rho, r.data_seed_value()});
  r.stage("data", seconds_since(t0));
  const double tail = (1.0 - cfg.lasso.level) / 2.0;
  const std::size_t coords = std::min(kPathCoords, cfg.design.p);

  for (std::size_t li = 0; li < cfg.lasso.log_lambdas.size(); ++li) {
    const double lambda = std::exp(cfg.lasso.log_lambdas[li]);
    const std::string setting = "lambda=" + fmt(lambda);
    const LossModel model = LossModel::squared(LaplacePrior{lambda});
    std::map<Method, std::vector<double>> widths;
    for (Method m : cfg.methods) {
      r.guarded(setting, m, [&] {
        SampleBatch b;
        const std::uint64_t seed = derive_seed(r.seed(m), {li});
        if (m == Method::DBS) {
          b = run_dbs_gibbs(r, setting, data, model, cfg.dbs, cfg.draws, seed);
          dbs_timing(r, setting, b);
        } else if (m == Method::WLB) {
          b = wlb_sample(data, model, cfg.wlb_draws, cfg.solver, seed);
          wlb_timing(r, setting, b);
        } else {
          const McmcResult res = mh_run(data, model, 1.0, mcmc_config(cfg, seed));
          mcmc_rows(r, setting, res);
          b = res.batch;
        }
        for (std::size_t k = 1; k <= coords; ++k) {
          const auto col = b.draws.col(static_cast<Eigen::Index>(k));
          const std::span<const double> v(col.data(), static_cast<std::size_t>(col.size()));
          const PathRow row{r.index(), lambda, k, m, quantile(v, tail), quantile(v, 1.0 - tail), col.mean()};
          r.path(row);
          r.result(setting, m, "width_" + std::to_string(k), row.hi - row.lo);
          r.result(setting, m, "mean_" + std::to_string(k), row.mean);
          widths[m].push_back(row.hi - row.lo);
        }
        r.save_batch(setting, b);
      });
    }
    if (widths.count(Method::DBS) && widths.count(Method::WLB)) {
      double ratio = 0.0;
      for (std::size_t k = 0; k < coords; ++k) ratio += widths[Method::DBS][k] / widths[Method::WLB][k];
      r.result(setting, Method::DBS, "width_ratio_to_WLB", ratio / static_cast<double>(coords));
    }
  }
}

void run_sweep(Replication& r, const ExperimentConfig& cfg) {
  for (std::size_t di = 0; di < cfg.sweep.designs.size(); ++di) {
    const auto [n, p] = cfg.sweep.designs[di];
    const std::string base = lad_setting(n, p, LadModel::M2_laplace);
    auto t0 = Clock::now();
    const Dataset data = gen_lad({n, p, LadModel::M2_laplace, derive_seed(r.data_seed_value(), {di})});
    r.stage("data", seconds_since(t0));
    double lambda = 0.0;
    try {
      lambda = lad_lambda(r, cfg, data);
    } catch (const std::exception& e) {
      r.error(base + " BIC: " + e.what());
      continue;
    }
    const LossModel model = LossModel::lad(LaplacePrior{lambda});
    const Parameter theta0 = lad_truth(p);
    const auto mask = lad_active_mask(p);

    std::map<std::pair<std::size_t, std::size_t>, IntervalReport> cache;
    auto cell = [&](const std::string& sweep, std::size_t depth, std::size_t width) {
      const std::string setting =
          base + ";sweep=" + sweep + ";depth=" + std::to_string(depth) + ";width=" + std::to_string(width);
      r.guarded(setting, Method::DBS, [&] {
        const auto key = std::make_pair(depth, width);
        if (!cache.count(key)) {
          DbsConfig dbs = cfg.dbs;
          dbs.hidden_widths.assign(depth, width);
          const std::uint64_t seed = derive_seed(r.seed(Method::DBS), {di, depth, width});
          const SampleBatch b = run_dbs_gibbs(r, setting, data, model, dbs, cfg.draws, seed);
          dbs_timing(r, setting, b);
          cache[key] = interval_report(b, theta0, mask, cfg.level);
          r.save_batch(setting, b);
        }
        r.result(setting, Method::DBS, "lambda", lambda);
        r.interval_rows(setting, Method::DBS, cache[key]);
      });
    };
    for (std::size_t d : cfg.sweep.depths) cell("depth", d, cfg.sweep.fixed_width);
    for (std::size_t w : cfg.sweep.widths) cell("width", cfg.sweep.fixed_depth, w);
  }
}

void run_smoke(Replication& r, const ExperimentConfig& cfg) {
  const std::size_t p = cfg.design.p;
  const Parameter theta0 = lad_truth(p);
  const Eigen::RowVectorXd truth = theta0.full().transpose();
  for (std::size_t si = 0; si < cfg.smoke.sizes.size(); ++si) {
    const std::size_t n = cfg.smoke.sizes[si];
    const std::string setting = lad_setting(n, p, LadModel::M2_laplace);
    auto t0 = Clock::now();
    const Dataset data = gen_lad({n, p, LadModel::M2_laplace, derive_seed(r.data_seed_value(), {si})});
    r.stage("data", seconds_since(t0));
    const LossModel model = LossModel::lad(LaplacePrior{cfg.lambda.value_or(0.0)});
    std::vector<std::pair<Method, Eigen::RowVectorXd>> means;
    run_lad_methods(r, cfg, setting, data, model, theta0, lad_active_mask(p), &means);
    for (const auto& [m, mean] : means) r.result(setting, m, "bias_l2", (mean - truth).norm());
  }
}

}  // namespace

// ------------------------------------------------------------------ public API

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::SvmNpl: return "svm_npl";
    case ExperimentKind::LadGibbs: return "lad_gibbs";
    case ExperimentKind::LassoPath: return "lasso_path";
    case ExperimentKind::ArchSweep: return "arch_sweep";
    case ExperimentKind::ConcentrationSmoke: return "concentration_smoke";
  }
  return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (auto k : {ExperimentKind::SvmNpl, ExperimentKind::LadGibbs, ExperimentKind::LassoPath, ExperimentKind::ArchSweep,
                 ExperimentKind::ConcentrationSmoke}) {
    if (to_string(k) == s) return k;
  }
  throw ContractError("unknown experiment '" + s + "'");
}

std::vector<std::string> preset_names() {
  return {"svm_npl",      "svm_npl_indep", "svm_npl_p50",   "svm_npl_full", "lad_gibbs",          "lad_gibbs_m1",
          "lad_gibbs_p50", "lad_gibbs_full", "lasso_path", "arch_sweep",   "concentration_smoke"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  if (name.rfind("svm_npl", 0) == 0) {
    c.experiment = ExperimentKind::SvmNpl;
    c.design = DesignConfig{50, 10, 0.6, 1.0, 100, LadModel::M2_laplace};
    c.methods = {Method::DBS, Method::WLB};
    if (name == "svm_npl_indep") c.design.rho = 0.0;
    if (name == "svm_npl_p50") c.design.n = 500, c.design.p = 50;
    if (name == "svm_npl_full") c.design.n = 5000, c.design.p = 500;
    if (name != "svm_npl" && name != "svm_npl_indep" && name != "svm_npl_p50" && name != "svm_npl_full")
      throw ContractError("unknown preset '" + name + "'");
    return c;
  }
  if (name.rfind("lad_gibbs", 0) == 0) {
    c.experiment = ExperimentKind::LadGibbs;
    c.design = DesignConfig{100, 8, 0.0, 1.0, 0, LadModel::M2_laplace};
    c.methods = {Method::DBS, Method::WLB, Method::MCMC};
    if (name == "lad_gibbs_m1") c.design.model = LadModel::M1_large_outliers;
    if (name == "lad_gibbs_p50") c.design.n = 1000, c.design.p = 50;
    if (name == "lad_gibbs_full") c.design.n = 5000, c.design.p = 500;
    if (name != "lad_gibbs" && name != "lad_gibbs_m1" && name != "lad_gibbs_p50" && name != "lad_gibbs_full")
      throw ContractError("unknown preset '" + name + "'");
    return c;
  }
  if (name == "lasso_path") {
    c.experiment = ExperimentKind::LassoPath;
    c.design = DesignConfig{1000, 50, 0.6, 1.0, 0, LadModel::M2_laplace};
    c.methods = {Method::DBS, Method::WLB};
    c.replications = 1;
    c.lasso.log_lambdas.clear();
    for (int i = 0; i < 8; ++i) c.lasso.log_lambdas.push_back(std::log(1000.0) * i / 7.0);
    return c;
  }
  if (name == "arch_sweep") {
    c.experiment = ExperimentKind::ArchSweep;
    c.design = DesignConfig{100, 8, 0.0, 1.0, 0, LadModel::M2_laplace};
    c.methods = {Method::DBS};
    c.replications = 1;
    return c;
  }
  if (name == "concentration_smoke") {
    c.experiment = ExperimentKind::ConcentrationSmoke;
    c.design = DesignConfig{100, 8, 0.0, 1.0, 0, LadModel::M2_laplace};
    c.methods = {Method::WLB};
    c.wlb_draws = 200;
    c.lambda = 0.0;
    return c;
  }
  throw ContractError("unknown preset '" + name + "'");
}

bool is_full_scale(const ExperimentConfig& cfg) {
  auto big = [](std::size_t n, std::size_t p) { return n >= 5000 || p >= 500; };
  switch (cfg.experiment) {
    case ExperimentKind::ArchSweep:
      return std::any_of(cfg.sweep.designs.begin(), cfg.sweep.designs.end(),
                         [&](const auto& d) { return big(d.first, d.second); });
    case ExperimentKind::ConcentrationSmoke:
      return std::any_of(cfg.smoke.sizes.begin(), cfg.smoke.sizes.end(),
                         [&](std::size_t n) { return big(n, cfg.design.p); });
    default:
      return big(cfg.design.n, cfg.design.p);
  }
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.experiment);
  j["design"] = {{"n", c.design.n},           {"p", c.design.p},
                 {"rho", c.design.rho},       {"signal", c.design.signal},
                 {"test_size", c.design.test_size}, {"model", to_string(c.design.model)}};
  std::vector<std::string> methods;
  for (Method m : c.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["replications"] = c.replications;
  j["draws"] = c.draws;
  j["wlb_draws"] = c.wlb_draws;
  j["lambda"] = c.lambda ? json(*c.lambda) : json(nullptr);
  j["level"] = c.level;
  j["dbs"] = {{"epochs", c.dbs.epochs},
              {"mc_draws", c.dbs.mc_draws},
              {"subgroups", c.dbs.subgroups},
              {"pseudo_subgroups", c.dbs.pseudo_subgroups},
              {"alpha", c.dbs.alpha},
              {"n_prime", c.dbs.n_prime},
              {"base_lr", c.dbs.base_lr},
              {"lr_decay_exponent", c.dbs.lr_decay_exponent},
              {"rmsprop_decay", c.dbs.rmsprop_decay},
              {"rmsprop_epsilon", c.dbs.rmsprop_epsilon},
              {"hidden_widths", c.dbs.hidden_widths},
              {"activation", to_string(c.dbs.activation)}};
  j["solver"] = {{"max_epochs", c.solver.max_epochs},
                 {"lr_grid", c.solver.lr_grid},
                 {"early_stop_patience", c.solver.early_stop_patience},
                 {"early_stop_tol", c.solver.early_stop_tol},
                 {"batch_mode", batch_mode_name(c.solver.batch_mode)},
                 {"minibatch", c.solver.minibatch},
                 {"threads", c.solver.threads}};
  j["mcmc"] = {{"iterations", c.mcmc.iterations},
               {"burn_in", c.mcmc.burn_in},
               {"proposal_sd", c.mcmc.proposal_sd},
               {"chains", c.mcmc.chains},
               {"zero_accept_window", c.mcmc.zero_accept_window}};
  j["lasso"] = {{"log_lambdas", c.lasso.log_lambdas}, {"level", c.lasso.level}};
  std::vector<std::vector<std::size_t>> designs;
  for (const auto& [n, p] : c.sweep.designs) designs.push_back({n, p});
  j["sweep"] = {{"depths", c.sweep.depths},
                {"widths", c.sweep.widths},
                {"fixed_width", c.sweep.fixed_width},
                {"fixed_depth", c.sweep.fixed_depth},
                {"designs", designs}};
  j["smoke"] = {{"sizes", c.smoke.sizes}};
  j["target_samples"] = c.target_samples;
  j["threads"] = c.threads;
  j["save_draws"] = c.save_draws;
  j["dump_weights"] = c.dump_weights;
  j["output_dir"] = c.output_dir;
  j["master_seed"] = c.master_seed;
  return j;
}

ExperimentConfig apply_json(ExperimentConfig c, const json& j) {
  Fields top(j, "");
  std::string kind;
  top.get("experiment", kind);
  if (!kind.empty()) c.experiment = experiment_kind_from_string(kind);
  std::string ignored;
  top.get("preset", ignored);

  if (const json* d = top.section("design")) {
    Fields f(*d, top.path("design"));
    f.get("n", c.design.n);
    f.get("p", c.design.p);
    f.get("rho", c.design.rho);
    f.get("signal", c.design.signal);
    f.get("test_size", c.design.test_size);
    std::string model;
    f.get("model", model);
    if (!model.empty()) c.design.model = lad_model_from_string(model);
    f.finish();
  }
  std::vector<std::string> methods;
  top.get("methods", methods);
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : methods) c.methods.push_back(method_from_string(m));
    std::sort(c.methods.begin(), c.methods.end());
    c.methods.erase(std::unique(c.methods.begin(), c.methods.end()), c.methods.end());
  }
  top.get("replications", c.replications);
  top.get("draws", c.draws);
  top.get("wlb_draws", c.wlb_draws);
  if (const json* l = top.section("lambda")) {
    if (l->is_null()) {
      c.lambda.reset();
    } else if (l->is_number()) {
      c.lambda = l->get<double>();
    } else {
      throw ContractError("config: 'lambda' must be a number or null");
    }
  }
  top.get("level", c.level);
  if (const json* d = top.section("dbs")) {
    Fields f(*d, top.path("dbs"));
    f.get("epochs", c.dbs.epochs);
    f.get("mc_draws", c.dbs.mc_draws);
    f.get("subgroups", c.dbs.subgroups);
    f.get("pseudo_subgroups", c.dbs.pseudo_subgroups);
    f.get("alpha", c.dbs.alpha);
    f.get("n_prime", c.dbs.n_prime);
    f.get("base_lr", c.dbs.base_lr);
    f.get("lr_decay_exponent", c.dbs.lr_decay_exponent);
    f.get("rmsprop_decay", c.dbs.rmsprop_decay);
    f.get("rmsprop_epsilon", c.dbs.rmsprop_epsilon);
    f.get("hidden_widths", c.dbs.hidden_widths);
    std::string act;
    f.get("activation", act);
    if (!act.empty()) c.dbs.activation = activation_from_string(act);
    f.finish();
  }
  if (const json* d = top.section("solver")) {
    Fields f(*d, top.path("solver"));
    f.get("max_epochs", c.solver.max_epochs);
    f.get("lr_grid", c.solver.lr_grid);
    f.get("early_stop_patience", c.solver.early_stop_patience);
    f.get("early_stop_tol", c.solver.early_stop_tol);
    std::string mode;
    f.get("batch_mode", mode);
    if (!mode.empty()) c.solver.batch_mode = batch_mode_from_string(mode);
    f.get("minibatch", c.solver.minibatch);
    f.get("threads", c.solver.threads);
    f.finish();
  }
  if (const json* d = top.section("mcmc")) {
    Fields f(*d, top.path("mcmc"));
    f.get("iterations", c.mcmc.iterations);
    f.get("burn_in", c.mcmc.burn_in);
    f.get("proposal_sd", c.mcmc.proposal_sd);
    f.get("chains", c.mcmc.chains);
    f.get("zero_accept_window", c.mcmc.zero_accept_window);
    f.finish();
  }
  if (const json* d = top.section("lasso")) {
    Fields f(*d, top.path("lasso"));
    f.get("log_lambdas", c.lasso.log_lambdas);
    f.get("level", c.lasso.level);
    f.finish();
  }
  if (const json* d = top.section("sweep")) {
    Fields f(*d, top.path("sweep"));
    f.get("depths", c.sweep.depths);
    f.get("widths", c.sweep.widths);
    f.get("fixed_width", c.sweep.fixed_width);
    f.get("fixed_depth", c.sweep.fixed_depth);
    std::vector<std::vector<std::size_t>> designs;
    f.get("designs", designs);
    if (d->contains("designs")) {
      c.sweep.designs.clear();
      for (const auto& np : designs) {
        if (np.size() != 2) throw ContractError("config: sweep.designs entries are [n, p]");
        c.sweep.designs.emplace_back(np[0], np[1]);
      }
    }
    f.finish();
  }
  if (const json* d = top.section("smoke")) {
    Fields f(*d, top.path("smoke"));
    f.get("sizes", c.smoke.sizes);
    f.finish();
  }
  top.get("target_samples", c.target_samples);
  top.get("threads", c.threads);
  top.get("save_draws", c.save_draws);
  top.get("dump_weights", c.dump_weights);
  top.get("output_dir", c.output_dir);
  top.get("master_seed", c.master_seed);
  top.finish();

  require(!c.methods.empty(), "config: at least one method is required");
  require(c.replications >= 1, "config: replications must be >= 1");
  require(c.draws >= 1 && c.wlb_draws >= 1, "config: draw counts must be >= 1");
  require(c.level > 0.0 && c.level < 1.0, "config: level must be in (0, 1)");
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ContractError("config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ContractError("config " + path.string() + ": expected an object");
  ExperimentConfig base;
  if (j.contains("preset")) {
    base = preset(j.at("preset").get<std::string>());
  } else if (j.contains("experiment")) {
    base = preset(j.at("experiment").get<std::string>());
  } else {
    throw ContractError("config " + path.string() + ": needs 'experiment' or 'preset'");
  }
  return apply_json(base, j);
}

std::uint64_t data_seed(std::uint64_t master, std::size_t replication) { return derive_seed(master, {replication}); }

std::uint64_t method_seed(std::uint64_t master, std::size_t replication, Method method) {
  return derive_seed(master, {replication, 1 + static_cast<std::uint64_t>(method)});
}

std::string content_hash(const json& config) {
  const std::string text = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool RunManifest::all_ok() const {
  return std::all_of(replications.begin(), replications.end(), [](const auto& r) { return r.ok(); });
}

json RunManifest::to_json() const {
  json j;
  j["config"] = config;
  j["content_hash"] = content_hash;
  std::vector<json> reps;
  for (const auto& r : replications) {
    json seeds = json::object();
    for (const auto& [m, s] : r.method_seeds) seeds[m] = s;
    reps.push_back({{"replication", r.replication},
                    {"data_seed", r.data_seed},
                    {"method_seeds", seeds},
                    {"status", r.ok() ? "ok" : "failed"},
                    {"errors", r.errors},
                    {"stage_seconds", r.stage_seconds}});
  }
  j["replications"] = reps;
  j["stage_seconds"] = stage_seconds;
  j["artifacts"] = artifacts;
  j["all_ok"] = all_ok();
  return j;
}

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  require(cfg.replications >= 1, "run_experiment: replications must be >= 1");
  require(!cfg.methods.empty(), "run_experiment: no methods");
  if (is_full_scale(cfg) && !options.full_scale) {
    throw ContractError("this configuration is full scale (n >= 5000 or p >= 500); pass --full-scale to run it");
  }
  if (cfg.experiment == ExperimentKind::LassoPath) {
    require(!cfg.lasso.log_lambdas.empty(), "lasso_path: empty lambda grid");
  }

  RunResult result;
  RunManifest& manifest = result.manifest;
  manifest.config = to_json(cfg);
  manifest.content_hash = content_hash(manifest.config);

  Parameter svm_target;
  if (cfg.experiment == ExperimentKind::SvmNpl) {
    const auto t0 = Clock::now();
    TargetSpec spec;
    spec.samples = cfg.target_samples;
    svm_target = population_target(LossModel::hinge(),
                                   SvmDesign{cfg.design.n, cfg.design.p, cfg.design.rho, cfg.design.signal, 0, 0}, spec)
                     .theta0;
    manifest.stage_seconds["target"] = seconds_since(t0);
  }

  std::vector<std::size_t> reps;
  if (options.only_replication) {
    require(*options.only_replication < cfg.replications, "run_experiment: replication index out of range");
    reps.push_back(*options.only_replication);
  } else {
    for (std::size_t r = 0; r < cfg.replications; ++r) reps.push_back(r);
  }

  std::vector<RepOutput> outputs(reps.size());
  parallel_for(
      reps.size(),
      [&](std::size_t i) {
        Replication rep(cfg, reps[i], options.write_files);
        try {
          switch (cfg.experiment) {
            case ExperimentKind::SvmNpl: run_svm(rep, cfg, svm_target); break;
            case ExperimentKind::LadGibbs: run_lad(rep, cfg); break;
            case ExperimentKind::LassoPath: run_lasso(rep, cfg); break;
            case ExperimentKind::ArchSweep: run_sweep(rep, cfg); break;
            case ExperimentKind::ConcentrationSmoke: run_smoke(rep, cfg); break;
          }
        } catch (const std::exception& e) {
          rep.error(std::string("replication aborted: ") + e.what());
        }
        outputs[i] = rep.take();
      },
      cfg.threads);

  for (auto& o : outputs) {
    result.results.insert(result.results.end(), o.results.begin(), o.results.end());
    result.timings.insert(result.timings.end(), o.timings.begin(), o.timings.end());
    result.path.insert(result.path.end(), o.path.begin(), o.path.end());
    for (const auto& [stage, s] : o.record.stage_seconds) manifest.stage_seconds[stage] += s;
    manifest.artifacts.insert(manifest.artifacts.end(), o.artifacts.begin(), o.artifacts.end());
    manifest.replications.push_back(std::move(o.record));
  }

  if (options.write_files) {
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    write_results_csv(dir / "results.csv", result.results);
    write_results_csv(dir / "timing.csv", result.timings);
    manifest.artifacts.push_back("results.csv");
    manifest.artifacts.push_back("timing.csv");
    if (cfg.experiment == ExperimentKind::LassoPath) {
      write_path_csv(dir / "lasso_path.csv", result.path);
      manifest.artifacts.push_back("lasso_path.csv");
    }
    manifest.artifacts.push_back("manifest.json");
    std::ofstream(dir / "manifest.json") << manifest.to_json().dump(2) << '\n';
  }

  const bool any_ok = std::any_of(manifest.replications.begin(), manifest.replications.end(),
                                  [](const auto& r) { return r.ok(); });
  if (!any_ok && result.results.empty()) {
    std::string first = manifest.replications.empty() || manifest.replications.front().errors.empty()
                            ? std::string("unknown error")
                            : manifest.replications.front().errors.front();
    throw NumericalError("every replication failed; first error: " + first);
  }
  return result;
}

void write_results_csv(const fs::path& path, const std::vector<ResultRow>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "experiment,setting,replication,seed,method,metric,value\n";
  for (const auto& r : rows) {
    out << r.experiment << ',' << r.setting << ',' << r.replication << ',' << r.seed << ',' << to_string(r.method)
        << ',' << r.metric << ',' << format_double(r.value) << '\n';
  }
}

std::vector<ResultRow> read_results_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "experiment,setting,replication,seed,method,metric,value")
    throw ContractError(path.string() + ": not a results CSV");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw ContractError(path.string() + ": malformed row '" + line + "'");
    ResultRow r;
    r.experiment = cells[0];
    r.setting = cells[1];
    r.replication = std::stoull(cells[2]);
    r.seed = std::stoull(cells[3]);
    r.method = method_from_string(cells[4]);
    r.metric = cells[5];
    r.value = std::strtod(cells[6].c_str(), nullptr);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_path_csv(const fs::path& path, const std::vector<PathRow>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "replication,lambda,coord,method,lo,hi,mean\n";
  for (const auto& r : rows) {
    out << r.replication << ',' << format_double(r.lambda) << ',' << r.coord << ',' << to_string(r.method) << ','
        << format_double(r.lo) << ',' << format_double(r.hi) << ',' << format_double(r.mean) << '\n';
  }
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  using Key = std::tuple<std::string, std::string, int, std::string>;
  std::map<Key, std::vector<double>> groups;
  std::vector<Key> order;
  for (const auto& r : rows) {
    Key k{r.experiment, r.setting, static_cast<int>(r.method), r.metric};
    if (!groups.count(k)) order.push_back(k);
    groups[k].push_back(r.value);
  }
  std::vector<SummaryRow> out;
  for (const auto& k : order) {
    const auto& v = groups[k];
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    out.push_back({std::get<0>(k), std::get<1>(k), std::get<3>(k), static_cast<Method>(std::get<2>(k)), mean, sd,
                   v.size()});
  }
  return out;
}

void write_summary_csv(const fs::path& path, const std::vector<SummaryRow>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "experiment,setting,method,metric,mean,sd,count\n";
  for (const auto& r : rows) {
    out << r.experiment << ',' << r.setting << ',' << to_string(r.method) << ',' << r.metric << ','
        << format_double(r.mean) << ',' << format_double(r.sd) << ',' << r.count << '\n';
  }
}

}  // namespace deepboot
