// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [criterion numbers...]
//
// Experiment outputs and a copy of the report (report.txt) go to
// $DEEPBOOT_ACCEPTANCE_OUT (default: acceptance_out next to the binary).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>

#include "deepboot/datagen.hpp"
#include "deepboot/dbs.hpp"
#include "deepboot/exact.hpp"
#include "deepboot/experiment.hpp"
#include "deepboot/losses.hpp"
#include "deepboot/mcmc.hpp"
#include "deepboot/metrics.hpp"
#include "deepboot/ndnet.hpp"

using namespace deepboot;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;  // 0: no runtime bound
  std::function<Outcome()> run;
};

fs::path g_out;

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

/// Mean over replications of one metric, keyed by (setting, method).
std::map<std::pair<std::string, Method>, double> metric_means(const std::vector<ResultRow>& rows,
                                                             const std::string& metric) {
  std::map<std::pair<std::string, Method>, std::pair<double, int>> acc;
  for (const auto& r : rows) {
    if (r.metric != metric) continue;
    auto& [sum, count] = acc[{r.setting, r.method}];
    sum += r.value;
    ++count;
  }
  std::map<std::pair<std::string, Method>, double> out;
  for (const auto& [k, v] : acc) out[k] = v.first / v.second;
  return out;
}

double only_setting(const std::map<std::pair<std::string, Method>, double>& m, Method method) {
  for (const auto& [k, v] : m)
    if (k.second == method) return v;
  throw std::runtime_error("missing metric for " + to_string(method));
}

RunResult run_preset(const std::string& name, const json& overrides) {
  json j = overrides;
  j["output_dir"] = (g_out / name).string();
  const ExperimentConfig cfg = apply_json(preset(name), j);
  RunResult r = run_experiment(cfg);
  if (!r.manifest.all_ok()) {
    for (const auto& rep : r.manifest.replications)
      for (const auto& e : rep.errors) std::fprintf(stderr, "  [%s rep %zu] %s\n", name.c_str(), rep.replication, e.c_str());
  }
  return r;
}

// ------------------------------------------------------------------ 1

Outcome gradient_oracle() {
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t in = 1 + rng.index(4), out = 1 + rng.index(3), depth = 1 + rng.index(3);
    std::vector<std::size_t> hidden(depth);
    for (auto& h : hidden) h = 1 + rng.index(5);
    GeneratorNetwork net(in, hidden, out, trial % 3 == 0 ? Activation::Sigmoid : Activation::ReLU);
    net.initialize(rng);
    for (auto& v : net.params()) v += 0.1 * rng.normal();
    Eigen::VectorXd w(static_cast<Eigen::Index>(in)), og(static_cast<Eigen::Index>(out));
    for (auto& v : w) v = rng.normal();
    for (auto& v : og) v = rng.normal();
    const Eigen::VectorXd g = net.backward(w, og);
    Eigen::VectorXd fd(g.size());
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < fd.size(); ++i) {
      const double keep = net.params()[i];
      net.params()[i] = keep + h;
      const double up = og.dot(net.forward(w));
      net.params()[i] = keep - h;
      const double down = og.dot(net.forward(w));
      net.params()[i] = keep;
      fd[i] = (up - down) / (2 * h);
    }
    worst = std::max(worst, (g - fd).norm() / std::max({g.norm(), fd.norm(), 1e-12}));
  }
  return {worst < 1e-4, fmt("worst relative error %.2e over 100 networks", worst)};
}

// ------------------------------------------------------------------ 2

Outcome gap_certificate() {
  const ExperimentConfig cfg = preset("svm_npl");
  const std::uint64_t dseed = data_seed(cfg.master_seed, 0);
  const std::uint64_t mseed = method_seed(cfg.master_seed, 0, Method::DBS);
  const SvmData data = gen_svm({cfg.design.n, cfg.design.p, cfg.design.rho, cfg.design.signal, 0, dseed});
  Rng prior_rng(derive_seed(mseed, {3}));
  const Dataset pseudo = svm_prior_pseudo(data.train, data.train.size(), prior_rng);
  DbsConfig dbs = cfg.dbs;
  dbs.seed = derive_seed(mseed, {0});
  const DeepBootstrapSampler s = train_npl(data.train, pseudo, LossModel::hinge(), dbs);
  const Dataset all = training_data(s, data.train);

  Rng rng(77);
  int within = 0;
  double sum_g = 0.0, sum_opt = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Eigen::VectorXd compact = s.scheme.draw_compact(rng);
    const Eigen::VectorXd expanded = s.scheme.expand(compact);
    const Parameter g = Parameter::from_full(s.to_draws(s.net.forward(compact)).row(0).transpose());
    const double at_g = sampler_objective(s, data.train, g, expanded);
    const double opt = solve_weighted(all, s.model, expanded, cfg.solver, 0.0).objective;
    sum_g += at_g;
    sum_opt += opt;
    if (at_g <= opt + 0.05 * std::abs(opt) + 0.05) ++within;
  }
  return {within == 50, std::to_string(within) + "/50 draws within 5% + 0.05; mean objective G " +
                            fmt("%.3f vs optimum %.3f", sum_g / 50, sum_opt / 50)};
}

// ------------------------------------------------------------------ 3, 4

Outcome table1_block() {
  const RunResult r = run_preset("svm_npl", json::object());
  const double acc_d = only_setting(metric_means(r.results, "accuracy"), Method::DBS);
  const double acc_w = only_setting(metric_means(r.results, "accuracy"), Method::WLB);
  const double auc_d = only_setting(metric_means(r.results, "roc_auc"), Method::DBS);
  const double auc_w = only_setting(metric_means(r.results, "roc_auc"), Method::WLB);
  const bool pass = r.manifest.all_ok() && std::abs(acc_d - 0.83) <= 0.05 && std::abs(acc_w - 0.86) <= 0.05 &&
                    std::abs(auc_d - 0.91) <= 0.04 && std::abs(auc_w - 0.94) <= 0.04;
  return {pass, fmt("accuracy DBS %.3f WLB %.3f", acc_d, acc_w) + fmt(", ROC-AUC DBS %.3f WLB %.3f", auc_d, auc_w)};
}

Outcome independent_block() {
  const RunResult r = run_preset("svm_npl_indep", json{{"wlb_draws", 200}});
  const double acc_d = only_setting(metric_means(r.results, "accuracy"), Method::DBS);
  const double acc_w = only_setting(metric_means(r.results, "accuracy"), Method::WLB);
  return {r.manifest.all_ok() && acc_d >= 0.97 && acc_w >= 0.97,
          fmt("accuracy DBS %.3f WLB %.3f (10 reps, 200 WLB draws)", acc_d, acc_w)};
}

// ------------------------------------------------------------------ 5

Outcome table2_block() {
  const RunResult r = run_preset("lad_gibbs", json::object());
  const auto cov_a = metric_means(r.results, "coverage_active");
  const auto cov_i = metric_means(r.results, "coverage_inactive");
  const auto len_a = metric_means(r.results, "length_active");
  const auto len_i = metric_means(r.results, "length_inactive");
  const double wa = only_setting(cov_a, Method::WLB), wi = only_setting(cov_i, Method::WLB);
  auto between = [](double mcmc, double dbs, double wlb) { return mcmc < dbs && dbs < wlb; };
  const double la_m = only_setting(len_a, Method::MCMC), la_d = only_setting(len_a, Method::DBS),
               la_w = only_setting(len_a, Method::WLB);
  const double li_m = only_setting(len_i, Method::MCMC), li_d = only_setting(len_i, Method::DBS),
               li_w = only_setting(len_i, Method::WLB);
  const bool pass = r.manifest.all_ok() && std::abs(wa - 0.90) <= 0.08 && std::abs(wi - 0.95) <= 0.08 &&
                    between(la_m, la_d, la_w) && between(li_m, li_d, li_w);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "WLB coverage(+) %.3f (-) %.3f; length(+) MCMC %.3f DBS %.3f WLB %.3f; length(-) MCMC %.3f DBS %.3f "
                "WLB %.3f",
                wa, wi, la_m, la_d, la_w, li_m, li_d, li_w);
  return {pass, buf};
}

// ------------------------------------------------------------------ 6

Outcome population_target_oracle() {
  const TargetResult t = population_target(LossModel::hinge(), SvmDesign{50, 10, 0.6, 1.0, 0, 0}, TargetSpec{});
  double worst = 0.0;
  for (double v : t.theta0.coefs) worst = std::max(worst, std::abs(v - 0.2));
  return {std::abs(t.theta0.intercept) <= 0.05 && worst <= 0.05,
          fmt("|beta| %.4f, max |theta_j - 0.2| %.4f", std::abs(t.theta0.intercept), worst)};
}

// ------------------------------------------------------------------ 7

Outcome mcmc_oracle() {
  Rng data_rng(3);
  Dataset d{Eigen::MatrixXd::Zero(20, 0), Eigen::VectorXd(20)};
  for (auto& v : d.y) v = 1.0 + data_rng.laplace();
  const auto model = LossModel::lad(LaplacePrior{0.0});
  McmcConfig cfg;
  cfg.chains = 4;
  cfg.iterations = 30000;
  cfg.burn_in = 5000;
  cfg.proposal_sd = 0.6;
  cfg.seed = 4;
  const auto r = mh_run(d, model, 1.0, cfg);

  const double lo = d.y.minCoeff() - 5, hi = d.y.maxCoeff() + 5;
  const int cells = 200000;
  const double dx = (hi - lo) / cells;
  std::vector<double> dens(cells + 1), cdf(cells + 1, 0.0);
  for (int i = 0; i <= cells; ++i) dens[i] = gibbs_log_density(model, Parameter{lo + i * dx, Eigen::VectorXd()}, d, 1.0);
  const double top = *std::max_element(dens.begin(), dens.end());
  for (auto& v : dens) v = std::exp(v - top);
  for (int i = 1; i <= cells; ++i) cdf[i] = cdf[i - 1] + 0.5 * (dens[i - 1] + dens[i]) * dx;
  for (auto& v : cdf) v /= cdf.back();

  std::vector<double> draws(r.batch.draws.col(0).data(), r.batch.draws.col(0).data() + r.batch.size());
  std::sort(draws.begin(), draws.end());
  double ks = 0.0;
  const double m = static_cast<double>(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double pos = std::clamp((draws[i] - lo) / dx, 0.0, static_cast<double>(cells));
    const auto k = std::min(static_cast<int>(pos), cells - 1);
    const double f = cdf[k] + (pos - k) * (cdf[k + 1] - cdf[k]);
    ks = std::max({ks, std::abs((i + 1) / m - f), std::abs(f - i / m)});
  }
  return {draws.size() == 100000 && ks < 0.02, fmt("KS %.4f with %.0f retained draws", ks, m)};
}

// ------------------------------------------------------------------ 8

Outcome ess_check() {
  Rng rng(5);
  std::vector<double> x(100000);
  x[0] = rng.normal() / std::sqrt(1 - 0.25);
  for (std::size_t t = 1; t < x.size(); ++t) x[t] = 0.5 * x[t - 1] + rng.normal();
  const double expected = static_cast<double>(x.size()) / 3.0;
  const double ess = effective_sample_size(x).value;
  return {std::abs(ess - expected) < 0.1 * expected, fmt("ESS %.0f vs N/3 = %.0f", ess, expected)};
}

// ------------------------------------------------------------------ 9

Outcome timing_ratio() {
  const RunResult r = run_preset("svm_npl_p50", json{{"replications", 1}, {"wlb_draws", 20}, {"target_samples", 100000}});
  double dbs = 0.0, wlb = 0.0, train = 0.0;
  for (const auto& t : r.timings) {
    if (t.method == Method::DBS && t.metric == "sample_seconds_per_draw") dbs = t.value;
    if (t.method == Method::DBS && t.metric == "train_seconds") train = t.value;
    if (t.method == Method::WLB && t.metric == "seconds_per_draw") wlb = t.value;
  }
  const double ratio = wlb / dbs;
  char buf[200];
  std::snprintf(buf, sizeof buf, "WLB %.3g s/draw vs DBS %.3g s/draw (ratio %.0f; DBS training %.1f s)", wlb, dbs,
                ratio, train);
  return {r.manifest.all_ok() && dbs > 0.0 && ratio >= 50.0, buf};
}

// ------------------------------------------------------------------ 10

Outcome lasso_path_finding() {
  const RunResult r = run_preset("lasso_path", json::object());
  std::map<double, std::map<std::size_t, std::map<Method, double>>> width;
  for (const auto& row : r.path) width[row.lambda][row.coord][row.method] = row.hi - row.lo;
  std::vector<double> lambdas, ratios;
  std::string detail = "width ratio by lambda:";
  for (const auto& [lambda, coords] : width) {
    double ratio = 0.0;
    for (const auto& [coord, m] : coords) ratio += m.at(Method::DBS) / m.at(Method::WLB);
    ratio /= static_cast<double>(coords.size());
    lambdas.push_back(lambda);
    ratios.push_back(ratio);
    detail += fmt(" %.3g", ratio);
  }
  const double rho = spearman(lambdas, ratios);
  return {r.manifest.all_ok() && rho < 0.0, fmt("Spearman %.3f; ", rho) + detail};
}

// ------------------------------------------------------------------ 11

Outcome property_suites() {
  const fs::path dir = DEEPBOOT_TEST_BIN_DIR;
  std::string detail;
  bool pass = true;
  for (const char* suite : {"test_weights", "test_losses", "test_metrics", "test_exact", "test_experiment"}) {
    const auto t0 = Clock::now();
    const std::string cmd = (dir / suite).string() + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool ok = rc == 0 && secs < 60.0;
    pass = pass && ok;
    detail += std::string(detail.empty() ? "" : ", ") + suite + (ok ? " ok " : " FAILED ") + fmt("%.1fs", secs);
  }
  return {pass, detail};
}

// ------------------------------------------------------------------ 12

Outcome concentration_smoke() {
  const RunResult r = run_preset("concentration_smoke", json::object());
  const auto bias = metric_means(r.results, "bias_l2");
  std::vector<std::pair<std::size_t, double>> by_n;
  for (const auto& [k, v] : bias) {
    const std::size_t n = std::stoul(k.first.substr(2));
    by_n.emplace_back(n, v);
  }
  std::sort(by_n.begin(), by_n.end());
  bool monotone = by_n.size() == 3;
  std::string detail = "mean bias";
  for (std::size_t i = 0; i < by_n.size(); ++i) {
    detail += " n=" + std::to_string(by_n[i].first) + fmt(" %.3f", by_n[i].second);
    if (i > 0 && !(by_n[i].second < by_n[i - 1].second)) monotone = false;
  }
  if (by_n.size() == 3) detail += fmt("; ratio n=1600/n=100 %.3f", by_n[2].second / by_n[0].second);
  return {r.manifest.all_ok() && monotone, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const char* env = std::getenv("DEEPBOOT_ACCEPTANCE_OUT");
  g_out = env ? fs::path(env) : fs::absolute(fs::path(argv[0])).parent_path() / "acceptance_out";
  fs::create_directories(g_out);

  const std::vector<Criterion> criteria{
      {1, "gradient oracle", 10, gradient_oracle},
      {2, "generator gap certificate", 600, gap_certificate},
      {3, "SVM correlated block", 1800, table1_block},
      {4, "SVM independent block", 600, independent_block},
      {5, "LAD model 2 block", 3600, table2_block},
      {6, "population target", 300, population_target_oracle},
      {7, "MCMC oracle", 120, mcmc_oracle},
      {8, "ESS analytic", 0, ess_check},
      {9, "sampling cost ratio", 0, timing_ratio},
      {10, "LASSO path width trend", 1800, lasso_path_finding},
      {11, "property suites", 0, property_suites},
      {12, "concentration smoke", 0, concentration_smoke},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  std::FILE* report = std::fopen((g_out / "report.txt").string().c_str(), "w");
  auto emit = [&](const std::string& line) {
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    if (report) {
      std::fprintf(report, "%s\n", line.c_str());
      std::fflush(report);
    }
  };

  int passed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    ++ran;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", c.budget_seconds);
    }
    if (o.pass) ++passed;
    emit(std::string(o.pass ? "PASS" : "FAIL") + " [" + std::to_string(c.id) + "] " + c.name + ": " + o.detail +
         fmt(" (%.1f s)", secs));
  }
  emit(std::to_string(passed) + "/" + std::to_string(ran) + " criteria passed");
  if (report) std::fclose(report);
  return 0;
}
