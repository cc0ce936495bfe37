#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "deepboot/errors.hpp"
#include "deepboot/experiment.hpp"

namespace fs = std::filesystem;
using namespace deepboot;

namespace {

struct RunFlags {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<std::size_t> threads;
  std::string methods;
  std::string out;
  bool full_scale = false;
  bool save_draws = false;
  std::size_t dump_weights = 0;
  std::optional<std::size_t> only_rep;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--preset", f.preset, "named preset (see `deepboot presets`)");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--reps", f.reps, "number of replications");
  cmd->add_option("--threads", f.threads, "replications run concurrently");
  cmd->add_option("--methods", f.methods, "comma-separated subset of DBS,WLB,MCMC");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_flag("--full-scale", f.full_scale, "allow n >= 5000 or p >= 500 designs");
  cmd->add_flag("--save-draws", f.save_draws, "write draws, KDE grids and generator checkpoints");
  cmd->add_option("--dump-weights", f.dump_weights, "write this many DBS weight draws per replication");
  cmd->add_option("--only-rep", f.only_rep, "run a single replication by index");
}

ExperimentConfig resolve(const RunFlags& f, std::optional<ExperimentKind> expected, const std::string& fallback) {
  ExperimentConfig cfg;
  if (!f.config.empty()) {
    cfg = load_config(f.config);
  } else {
    cfg = preset(f.preset.empty() ? fallback : f.preset);
  }
  if (!f.config.empty() && !f.preset.empty()) throw ContractError("use either --config or --preset, not both");
  if (expected && cfg.experiment != *expected) {
    throw ContractError("this verb runs " + to_string(*expected) + " but the config is " + to_string(cfg.experiment));
  }
  nlohmann::json overrides = nlohmann::json::object();
  if (f.seed) overrides["master_seed"] = *f.seed;
  if (f.reps) overrides["replications"] = *f.reps;
  if (f.threads) overrides["threads"] = *f.threads;
  if (!f.out.empty()) overrides["output_dir"] = f.out;
  if (f.save_draws) overrides["save_draws"] = true;
  if (f.dump_weights > 0) overrides["dump_weights"] = f.dump_weights;
  if (!f.methods.empty()) {
    std::vector<std::string> names;
    std::stringstream ss(f.methods);
    for (std::string m; std::getline(ss, m, ',');)
      if (!m.empty()) names.push_back(m);
    overrides["methods"] = names;
  }
  return apply_json(cfg, overrides);
}

int execute(const RunFlags& f, std::optional<ExperimentKind> expected, const std::string& fallback) {
  const ExperimentConfig cfg = resolve(f, expected, fallback);
  RunOptions options;
  options.full_scale = f.full_scale;
  options.only_replication = f.only_rep;
  const RunResult r = run_experiment(cfg, options);
  std::size_t failed = 0;
  for (const auto& rep : r.manifest.replications) {
    for (const auto& e : rep.errors) std::cerr << "replication " << rep.replication << ": " << e << '\n';
    if (!rep.ok()) ++failed;
  }
  std::cout << to_string(cfg.experiment) << ": " << r.manifest.replications.size() - failed << "/"
            << r.manifest.replications.size() << " replications ok, " << r.results.size() << " result rows -> "
            << cfg.output_dir << '\n';
  return failed == 0 ? 0 : 1;
}

std::string cell(const SummaryRow& s) {
  char buf[64];
  if (s.count > 1) {
    std::snprintf(buf, sizeof buf, "%.4g (%.3g)", s.mean, s.sd);
  } else {
    std::snprintf(buf, sizeof buf, "%.4g", s.mean);
  }
  return buf;
}

/// Prints one block per setting with metrics as rows and methods as columns.
void print_table(const std::string& title, const std::vector<SummaryRow>& rows) {
  std::map<std::string, std::vector<const SummaryRow*>> by_setting;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    const std::string key = r.experiment + " " + r.setting;
    if (!by_setting.count(key)) order.push_back(key);
    by_setting[key].push_back(&r);
  }
  for (const auto& key : order) {
    std::cout << "\n" << title << ": " << key << "\n";
    std::vector<Method> methods;
    std::vector<std::string> metrics;
    std::map<std::pair<std::string, Method>, std::string> cells;
    for (const SummaryRow* r : by_setting[key]) {
      if (std::find(methods.begin(), methods.end(), r->method) == methods.end()) methods.push_back(r->method);
      if (std::find(metrics.begin(), metrics.end(), r->metric) == metrics.end()) metrics.push_back(r->metric);
      cells[{r->metric, r->method}] = cell(*r);
    }
    std::sort(methods.begin(), methods.end());
    std::printf("  %-26s", "metric");
    for (Method m : methods) std::printf(" %18s", to_string(m).c_str());
    std::printf("\n");
    for (const auto& metric : metrics) {
      std::printf("  %-26s", metric.c_str());
      for (Method m : methods) {
        auto it = cells.find({metric, m});
        std::printf(" %18s", it == cells.end() ? "-" : it->second.c_str());
      }
      std::printf("\n");
    }
  }
}

int report(const std::vector<std::string>& dirs, const std::string& out) {
  std::vector<ResultRow> results, timings;
  for (const auto& d : dirs) {
    const auto r = read_results_csv(fs::path(d) / "results.csv");
    results.insert(results.end(), r.begin(), r.end());
    if (fs::exists(fs::path(d) / "timing.csv")) {
      const auto t = read_results_csv(fs::path(d) / "timing.csv");
      timings.insert(timings.end(), t.begin(), t.end());
    }
  }
  const auto summary = summarize(results);
  const auto timing_summary = summarize(timings);
  const fs::path dest = out.empty() ? fs::path(dirs.front()) : fs::path(out);
  write_summary_csv(dest / "summary.csv", summary);
  if (!timing_summary.empty()) write_summary_csv(dest / "timing_summary.csv", timing_summary);
  print_table("results", summary);
  if (!timing_summary.empty()) print_table("timing (seconds)", timing_summary);
  std::cout << "\nwrote " << (dest / "summary.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep bootstrap sampler experiments"};
  app.require_subcommand(1);

  RunFlags run_flags, path_flags, sweep_flags, smoke_flags;
  auto* run = app.add_subcommand("run", "run an experiment from --config or --preset");
  add_run_flags(run, run_flags);
  auto* path = app.add_subcommand("lasso-path", "LASSO solution-path intervals for DBS and WLB");
  add_run_flags(path, path_flags);
  auto* sweep = app.add_subcommand("arch-sweep", "generator depth and width sweep on LAD designs");
  add_run_flags(sweep, sweep_flags);
  auto* smoke = app.add_subcommand("smoke", "WLB posterior-mean bias against sample size");
  add_run_flags(smoke, smoke_flags);

  std::vector<std::string> report_dirs;
  std::string report_out;
  auto* rep = app.add_subcommand("report", "aggregate results.csv files into summary tables");
  rep->add_option("dirs", report_dirs, "run output directories")->required()->check(CLI::ExistingDirectory);
  rep->add_option("--out", report_out, "directory for summary.csv (default: first input)");

  auto* presets = app.add_subcommand("presets", "list preset names");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (run_flags.config.empty() && run_flags.preset.empty()) throw ContractError("run needs --config or --preset");
      return execute(run_flags, std::nullopt, "");
    }
    if (path->parsed()) return execute(path_flags, ExperimentKind::LassoPath, "lasso_path");
    if (sweep->parsed()) return execute(sweep_flags, ExperimentKind::ArchSweep, "arch_sweep");
    if (smoke->parsed()) return execute(smoke_flags, ExperimentKind::ConcentrationSmoke, "concentration_smoke");
    if (rep->parsed()) return report(report_dirs, report_out);
    if (presets->parsed()) {
      for (const auto& name : preset_names()) {
        const auto cfg = preset(name);
        std::cout << name << (is_full_scale(cfg) ? "  (full scale)" : "") << '\n';
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
