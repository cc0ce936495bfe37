#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "deepboot/datagen.hpp"
#include "deepboot/dbs.hpp"
#include "deepboot/exact.hpp"
#include "deepboot/mcmc.hpp"
#include "deepboot/sample_batch.hpp"

namespace deepboot {

enum class ExperimentKind { SvmNpl, LadGibbs, LassoPath, ArchSweep, ConcentrationSmoke };

std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);

struct DesignConfig {
  std::size_t n = 50;
  std::size_t p = 10;
  double rho = 0.6;
  double signal = 1.0;
  std::size_t test_size = 100;
  LadModel model = LadModel::M2_laplace;
};

struct LassoPathConfig {
  std::vector<double> log_lambdas;  // natural-log penalty grid
  double level = 0.95;
};

struct SweepConfig {
  std::vector<std::size_t> depths{2, 3, 4, 5};
  std::vector<std::size_t> widths{16, 32, 64, 128};
  std::size_t fixed_width = 128;
  std::size_t fixed_depth = 3;
  std::vector<std::pair<std::size_t, std::size_t>> designs{{100, 8}, {1000, 50}};  // (n, p)
};

struct SmokeConfig {
  std::vector<std::size_t> sizes{100, 400, 1600};
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::SvmNpl;
  DesignConfig design;
  std::vector<Method> methods{Method::DBS, Method::WLB};
  std::size_t replications = 10;
  std::size_t draws = 10000;     // DBS draws per replication
  std::size_t wlb_draws = 1000;  // exact optimizations per replication
  std::optional<double> lambda;  // Laplace penalty; empty selects it by BIC (LAD) or uses 0
  double level = 0.90;
  DbsConfig dbs;
  SolverConfig solver;
  McmcConfig mcmc;
  LassoPathConfig lasso;
  SweepConfig sweep;
  SmokeConfig smoke;
  std::size_t target_samples = 1'000'000;
  std::size_t threads = 1;  // replications run concurrently
  bool save_draws = false;
  std::size_t dump_weights = 0;  // DBS compact weight draws written per replication
  std::string output_dir = "out";
  std::uint64_t master_seed = 2024;
};

std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);
/// Designs with n >= 5000 or p >= 500, which need an explicit opt-in.
bool is_full_scale(const ExperimentConfig& cfg);

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Applies the keys of `j` on top of `base`. Unknown keys are errors.
ExperimentConfig apply_json(ExperimentConfig base, const nlohmann::json& j);
/// Reads a JSON config; `experiment` or `preset` selects the defaults it overrides.
ExperimentConfig load_config(const std::filesystem::path& path);

std::uint64_t data_seed(std::uint64_t master, std::size_t replication);
std::uint64_t method_seed(std::uint64_t master, std::size_t replication, Method method);

struct ResultRow {
  std::string experiment;
  std::string setting;
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  Method method = Method::DBS;
  std::string metric;
  double value = 0.0;
};

struct PathRow {
  std::size_t replication = 0;
  double lambda = 0.0;
  std::size_t coord = 0;  // 1-based theta index
  Method method = Method::DBS;
  double lo = 0.0, hi = 0.0, mean = 0.0;
};

struct ReplicationRecord {
  std::size_t replication = 0;
  std::uint64_t data_seed = 0;
  std::map<std::string, std::uint64_t> method_seeds;
  std::vector<std::string> errors;
  std::map<std::string, double> stage_seconds;
  bool ok() const { return errors.empty(); }
};

struct RunManifest {
  nlohmann::json config;
  std::string content_hash;
  std::vector<ReplicationRecord> replications;
  std::map<std::string, double> stage_seconds;
  std::vector<std::string> artifacts;
  bool all_ok() const;
  nlohmann::json to_json() const;
};

struct RunOptions {
  bool full_scale = false;
  std::optional<std::size_t> only_replication;
  bool write_files = true;
};

struct RunResult {
  RunManifest manifest;
  std::vector<ResultRow> results;  // deterministic metrics
  std::vector<ResultRow> timings;  // wall-clock seconds
  std::vector<PathRow> path;       // lasso_path only
};

/// Runs every replication (fail-soft per replication) and, unless disabled,
/// writes results.csv, timing.csv, manifest.json and per-experiment
/// artifacts under cfg.output_dir. Throws if no replication produced any result.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

/// 64-bit FNV-1a over the canonical config text, as 16 hex digits.
std::string content_hash(const nlohmann::json& config);

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);
void write_path_csv(const std::filesystem::path& path, const std::vector<PathRow>& rows);

struct SummaryRow {
  std::string experiment, setting, metric;
  Method method = Method::DBS;
  double mean = 0.0, sd = 0.0;
  std::size_t count = 0;
};

/// Mean and standard deviation over replications per (experiment, setting, method, metric).
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);

}  // namespace deepboot
