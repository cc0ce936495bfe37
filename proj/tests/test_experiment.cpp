#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "deepboot/errors.hpp"
#include "deepboot/experiment.hpp"

using namespace deepboot;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("deepboot_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny_lad(const fs::path& out) {
  json j = {{"replications", 2},
            {"draws", 200},
            {"wlb_draws", 20},
            {"lambda", 1.0},
            {"design", {{"n", 40}, {"p", 4}}},
            {"dbs", {{"epochs", 40}, {"mc_draws", 10}, {"hidden_widths", {16, 16}}}},
            {"mcmc", {{"iterations", 4000}, {"burn_in", 500}, {"chains", 2}}},
            {"output_dir", out.string()}};
  return apply_json(preset("lad_gibbs"), j);
}

}  // namespace

TEST_CASE("every preset builds and only the large designs are gated") {
  std::set<std::string> gated;
  for (const auto& name : preset_names()) {
    const ExperimentConfig c = preset(name);
    CHECK(!c.methods.empty());
    CHECK(c.replications >= 1);
    if (is_full_scale(c)) gated.insert(name);
  }
  CHECK(gated == std::set<std::string>{"svm_npl_full", "lad_gibbs_full"});
  CHECK_THROWS_AS(preset("nope"), ContractError);

  const ExperimentConfig svm = preset("svm_npl");
  CHECK(svm.design.n == 50);
  CHECK(svm.design.p == 10);
  CHECK(svm.design.rho == 0.6);
  CHECK(svm.replications == 10);
  CHECK(svm.draws == 10000);
  const ExperimentConfig lad = preset("lad_gibbs");
  CHECK(lad.design.n == 100);
  CHECK(lad.design.p == 8);
  CHECK(lad.design.model == LadModel::M2_laplace);
  CHECK(lad.methods == std::vector<Method>{Method::DBS, Method::WLB, Method::MCMC});
}

TEST_CASE("config round trip through JSON is lossless") {
  for (const auto& name : preset_names()) {
    const ExperimentConfig c = preset(name);
    const json j = to_json(c);
    CHECK(to_json(apply_json(ExperimentConfig{}, j)) == j);
  }
}

TEST_CASE("unknown or mistyped config keys are errors") {
  const ExperimentConfig base = preset("lad_gibbs");
  CHECK_THROWS_AS(apply_json(base, json{{"replicates", 3}}), ContractError);
  CHECK_THROWS_AS(apply_json(base, json{{"dbs", {{"epoch", 3}}}}), ContractError);
  CHECK_THROWS_AS(apply_json(base, json{{"design", {{"n", "many"}}}}), ContractError);
  CHECK_THROWS_AS(apply_json(base, json{{"methods", {"DBS", "BOOT"}}}), ContractError);
  CHECK_THROWS_AS(apply_json(base, json{{"methods", json::array()}}), ContractError);
  CHECK_THROWS_AS(apply_json(base, json{{"replications", 0}}), ContractError);
  CHECK_THROWS_AS(apply_json(base, json{{"lambda", "big"}}), ContractError);

  const ExperimentConfig c = apply_json(base, json{{"lambda", 2.5}, {"methods", {"MCMC", "DBS", "MCMC"}}});
  REQUIRE(c.lambda.has_value());
  CHECK(*c.lambda == 2.5);
  CHECK(c.methods == std::vector<Method>{Method::DBS, Method::MCMC});
  CHECK_FALSE(apply_json(c, json{{"lambda", nullptr}}).lambda.has_value());
}

TEST_CASE("load_config applies overrides on top of the named preset") {
  const fs::path dir = scratch("load");
  fs::create_directories(dir);
  std::ofstream(dir / "a.json") << R"({"preset": "svm_npl_indep", "replications": 3, "dbs": {"epochs": 10}})";
  const ExperimentConfig c = load_config(dir / "a.json");
  CHECK(c.experiment == ExperimentKind::SvmNpl);
  CHECK(c.design.rho == 0.0);
  CHECK(c.replications == 3);
  CHECK(c.dbs.epochs == 10);

  std::ofstream(dir / "b.json") << R"({"replications": 3})";
  CHECK_THROWS_AS(load_config(dir / "b.json"), ContractError);
  std::ofstream(dir / "c.json") << R"({"experiment": "lad_gibbs", "mcmc": {"chain": 2}})";
  CHECK_THROWS_AS(load_config(dir / "c.json"), ContractError);
  std::ofstream(dir / "d.json") << "{ not json";
  CHECK_THROWS_AS(load_config(dir / "d.json"), ContractError);
  fs::remove_all(dir);
}

TEST_CASE("seeds share data within a replication and separate methods") {
  CHECK(data_seed(7, 0) != data_seed(7, 1));
  CHECK(data_seed(7, 0) != data_seed(8, 0));
  std::set<std::uint64_t> seeds;
  for (std::size_t r = 0; r < 5; ++r)
    for (Method m : {Method::DBS, Method::WLB, Method::MCMC}) seeds.insert(method_seed(7, r, m));
  CHECK(seeds.size() == 15);
  CHECK(method_seed(7, 3, Method::WLB) == method_seed(7, 3, Method::WLB));
}

TEST_CASE("full-scale designs need the explicit opt-in") {
  ExperimentConfig c = preset("lad_gibbs_full");
  CHECK_THROWS_AS(run_experiment(c, RunOptions{false, std::nullopt, false}), ContractError);
}

TEST_CASE("fixed seed reruns give byte-identical results and a stable hash") {
  const fs::path a = scratch("rerun_a");
  const fs::path b = scratch("rerun_b");
  ExperimentConfig ca = tiny_lad(a);
  ca.replications = 1;
  ExperimentConfig cb = ca;
  cb.output_dir = b.string();

  const RunResult ra = run_experiment(ca);
  const RunResult rb = run_experiment(cb);
  CHECK(ra.manifest.all_ok());
  CHECK(slurp(a / "results.csv") == slurp(b / "results.csv"));
  CHECK(!slurp(a / "results.csv").empty());

  // The hash covers the config, so only the output dir may differ.
  ExperimentConfig cc = ca;
  CHECK(content_hash(to_json(cc)) == ra.manifest.content_hash);
  cc.master_seed += 1;
  CHECK(content_hash(to_json(cc)) != ra.manifest.content_hash);

  const json manifest = json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["content_hash"] == ra.manifest.content_hash);
  CHECK(manifest["replications"][0]["status"] == "ok");
  CHECK(manifest["replications"][0]["data_seed"] == data_seed(ca.master_seed, 0));
  for (const auto& f : manifest["artifacts"]) CHECK(fs::exists(a / f.get<std::string>()));
  std::set<std::string> listed;
  for (const auto& f : manifest["artifacts"]) listed.insert(f.get<std::string>());
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (entry.is_regular_file()) CHECK(listed.count(fs::relative(entry.path(), a).string()) == 1);
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("a single replication rerun from its seed reproduces its rows") {
  const fs::path dir = scratch("single");
  const ExperimentConfig c = tiny_lad(dir);
  const RunResult all = run_experiment(c, RunOptions{false, std::nullopt, false});
  const RunResult one = run_experiment(c, RunOptions{false, 1, false});
  std::vector<ResultRow> expected;
  for (const auto& r : all.results)
    if (r.replication == 1) expected.push_back(r);
  REQUIRE(one.results.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(one.results[i].seed == expected[i].seed);
    CHECK(one.results[i].metric == expected[i].metric);
    CHECK(one.results[i].value == expected[i].value);
  }
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("rows carry experiment, seed and method, and timings keep the DBS split") {
  const RunResult r = run_experiment(tiny_lad(scratch("rows")), RunOptions{false, std::nullopt, false});
  REQUIRE(!r.results.empty());
  for (const auto& row : r.results) {
    CHECK(row.experiment == "lad_gibbs");
    CHECK(row.seed == method_seed(2024, row.replication, row.method));
    CHECK(std::isfinite(row.value));
  }
  std::map<std::pair<std::size_t, Method>, std::set<std::string>> metrics;
  for (const auto& row : r.timings) {
    CHECK(row.value > 0.0);
    metrics[{row.replication, row.method}].insert(row.metric);
  }
  for (std::size_t rep = 0; rep < 2; ++rep) {
    CHECK(metrics[{rep, Method::DBS}].count("train_seconds") == 1);
    CHECK(metrics[{rep, Method::DBS}].count("sample_seconds") == 1);
    CHECK(metrics[{rep, Method::WLB}].count("total_seconds") == 1);
    CHECK(metrics[{rep, Method::MCMC}].count("seconds_per_10k_ess") == 1);
  }
}

TEST_CASE("a failing method is recorded and the replication continues") {
  ExperimentConfig c = tiny_lad(scratch("failsoft"));
  c.mcmc.proposal_sd = 1e6;
  c.mcmc.zero_accept_window = 500;
  const RunResult r = run_experiment(c, RunOptions{false, std::nullopt, false});
  CHECK_FALSE(r.manifest.all_ok());
  REQUIRE(r.manifest.replications.size() == 2);
  CHECK(r.manifest.replications[0].errors.size() == 1);
  CHECK(r.manifest.replications[0].errors[0].find("MCMC") != std::string::npos);
  bool wlb_rows = false;
  for (const auto& row : r.results) wlb_rows = wlb_rows || row.method == Method::WLB;
  CHECK(wlb_rows);

  c.methods = {Method::MCMC};
  CHECK_THROWS_AS(run_experiment(c, RunOptions{false, std::nullopt, false}), NumericalError);
}

TEST_CASE("lasso path rows are ordered intervals") {
  const fs::path dir = scratch("lasso");
  ExperimentConfig c = apply_json(preset("lasso_path"), json{{"design", {{"n", 120}, {"p", 6}}},
                                                             {"draws", 300},
                                                             {"wlb_draws", 40},
                                                             {"dbs", {{"epochs", 60}, {"mc_draws", 10}}},
                                                             {"lasso", {{"log_lambdas", {0.0, 2.0}}}},
                                                             {"output_dir", dir.string()}});
  const RunResult r = run_experiment(c);
  CHECK(r.path.size() == 2 * 4 * 2);
  for (const auto& row : r.path) {
    CHECK(row.lo <= row.mean);
    CHECK(row.mean <= row.hi);
    CHECK(row.coord >= 1);
    CHECK(row.coord <= 4);
  }
  CHECK(fs::exists(dir / "lasso_path.csv"));
  fs::remove_all(dir);
}

TEST_CASE("results CSV reads back and summaries average over replications") {
  const fs::path dir = scratch("summary");
  std::vector<ResultRow> rows{{"lad_gibbs", "n=1", 0, 11, Method::WLB, "coverage_active", 1.0},
                              {"lad_gibbs", "n=1", 1, 12, Method::WLB, "coverage_active", 0.5},
                              {"lad_gibbs", "n=1", 0, 13, Method::DBS, "coverage_active", 0.25}};
  write_results_csv(dir / "results.csv", rows);
  const auto back = read_results_csv(dir / "results.csv");
  REQUIRE(back.size() == 3);
  CHECK(back[1].seed == 12);
  CHECK(back[1].value == 0.5);
  CHECK(back[2].method == Method::DBS);

  const auto s = summarize(back);
  REQUIRE(s.size() == 2);
  CHECK(s[0].method == Method::WLB);
  CHECK(s[0].count == 2);
  CHECK(s[0].mean == doctest::Approx(0.75));
  CHECK(s[0].sd == doctest::Approx(std::sqrt(0.125)));
  CHECK(s[1].count == 1);
  CHECK(s[1].sd == 0.0);
  fs::remove_all(dir);
}
