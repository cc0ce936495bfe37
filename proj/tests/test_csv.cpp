#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "deepboot/csv.hpp"
#include "deepboot/errors.hpp"
#include "deepboot/rng.hpp"

using namespace deepboot;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("deepboot_test_" + name); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("doubles round-trip through text") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(rng.normal(), static_cast<int>(rng.index(200)) - 100);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("sample batch CSV round trip") {
  Rng rng(2);
  SampleBatch b;
  b.method = Method::MCMC;
  b.draws.resize(7, 4);
  for (auto& v : b.draws.reshaped()) v = rng.normal();
  b.draws(0, 0) = std::numeric_limits<double>::denorm_min();
  b.draws(1, 1) = -std::numeric_limits<double>::max();
  const auto path = temp_file("batch.csv");
  write_sample_batch_csv(path, b);
  CHECK(slurp(path).rfind("method,beta,theta_1,theta_2,theta_3\n", 0) == 0);
  const auto back = read_sample_batch_csv(path);
  CHECK(back.method == Method::MCMC);
  CHECK(back.draws == b.draws);
  fs::remove(path);
}

TEST_CASE("dataset CSV keeps provenance") {
  Rng rng(3);
  Dataset d{Eigen::MatrixXd(5, 2), Eigen::VectorXd(5)};
  for (auto& v : d.x.reshaped()) v = rng.normal();
  for (auto& v : d.y) v = rng.rademacher();
  const auto path = temp_file("data.csv");
  write_dataset_csv(path, d, {{"design", "svm"}, {"seed", 17}});
  const auto back = read_dataset_csv(path);
  CHECK(back.data.x == d.x);
  CHECK(back.data.y == d.y);
  CHECK(back.provenance["seed"] == 17);
  CHECK(slurp(path).rfind("# {", 0) == 0);
  fs::remove(path);
}

TEST_CASE("method names") {
  for (auto m : {Method::DBS, Method::WLB, Method::MCMC}) CHECK(method_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(method_from_string("HMC"), ContractError);
}

TEST_CASE("trace and weights CSVs") {
  const auto path = temp_file("trace.csv");
  write_trace_csv(path, {3.0, 2.5});
  CHECK(slurp(path) == "epoch,objective\n1,3\n2,2.5\n");
  Eigen::MatrixXd w(2, 3);
  w << 1, 2, 3, 0.5, 0.25, 0.125;
  write_weights_csv(path, w);
  CHECK(slurp(path) == "w_1,w_2,w_3\n1,2,3\n0.5,0.25,0.125\n");
  fs::remove(path);
}
