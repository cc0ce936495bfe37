#include "deepboot/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "deepboot/errors.hpp"

namespace deepboot {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return in;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_double(const std::string& s, const std::filesystem::path& path) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ContractError(path.string() + ": bad number '" + s + "'");
  return v;
}

std::string coef_header(std::size_t p, const std::string& prefix) {
  std::string h;
  for (std::size_t j = 1; j <= p; ++j) h += "," + prefix + std::to_string(j);
  return h;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::DBS: return "DBS";
    case Method::WLB: return "WLB";
    case Method::MCMC: return "MCMC";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "DBS" || s == "dbs") return Method::DBS;
  if (s == "WLB" || s == "wlb") return Method::WLB;
  if (s == "MCMC" || s == "mcmc" || s == "Gibbs") return Method::MCMC;
  throw ContractError("unknown method '" + s + "'");
}

void write_sample_batch_csv(const std::filesystem::path& path, const SampleBatch& batch) {
  auto out = open_out(path);
  out << "method,beta" << coef_header(batch.dim() - 1, "theta_") << '\n';
  const std::string m = to_string(batch.method);
  for (Eigen::Index i = 0; i < batch.draws.rows(); ++i) {
    out << m;
    for (Eigen::Index j = 0; j < batch.draws.cols(); ++j) out << ',' << format_double(batch.draws(i, j));
    out << '\n';
  }
}

SampleBatch read_sample_batch_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ContractError(path.string() + ": empty file");
  const auto header = split(line);
  require(header.size() >= 2 && header[0] == "method" && header[1] == "beta", path.string() + ": not a sample CSV");
  std::vector<std::vector<double>> rows;
  SampleBatch batch;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    require(cells.size() == header.size(), path.string() + ": ragged row");
    batch.method = method_from_string(cells[0]);
    std::vector<double> row;
    for (std::size_t j = 1; j < cells.size(); ++j) row.push_back(parse_double(cells[j], path));
    rows.push_back(std::move(row));
  }
  batch.draws.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size() - 1));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) batch.draws(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return batch;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data, const nlohmann::json& provenance) {
  auto out = open_out(path);
  out << "# " << provenance.dump() << '\n';
  out << 'y' << coef_header(data.dim(), "x_") << '\n';
  for (Eigen::Index i = 0; i < data.y.size(); ++i) {
    out << format_double(data.y[i]);
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) out << ',' << format_double(data.x(i, j));
    out << '\n';
  }
}

LoadedDataset read_dataset_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  LoadedDataset out;
  if (!std::getline(in, line)) throw ContractError(path.string() + ": empty file");
  if (line.rfind("# ", 0) == 0) {
    out.provenance = nlohmann::json::parse(line.substr(2));
    if (!std::getline(in, line)) throw ContractError(path.string() + ": missing header");
  }
  const auto header = split(line);
  require(!header.empty() && header[0] == "y", path.string() + ": not a dataset CSV");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    require(cells.size() == header.size(), path.string() + ": ragged row");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_double(c, path));
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(header.size() - 1);
  out.data.x.resize(n, p);
  out.data.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.data.y[i] = rows[static_cast<std::size_t>(i)][0];
    for (Eigen::Index j = 0; j < p; ++j) out.data.x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j + 1)];
  }
  return out;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<double>& trace) {
  auto out = open_out(path);
  out << "epoch,objective\n";
  for (std::size_t t = 0; t < trace.size(); ++t) out << t + 1 << ',' << format_double(trace[t]) << '\n';
}

void write_chain_csv(const std::filesystem::path& path, const std::vector<Eigen::MatrixXd>& chains) {
  auto out = open_out(path);
  const auto p = chains.empty() ? 0 : static_cast<std::size_t>(chains.front().cols()) - 1;
  out << "chain,iteration,beta" << coef_header(p, "theta_") << '\n';
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (Eigen::Index i = 0; i < chains[c].rows(); ++i) {
      out << c << ',' << i;
      for (Eigen::Index j = 0; j < chains[c].cols(); ++j) out << ',' << format_double(chains[c](i, j));
      out << '\n';
    }
  }
}

void write_weights_csv(const std::filesystem::path& path, const Eigen::MatrixXd& rows) {
  auto out = open_out(path);
  for (Eigen::Index j = 0; j < rows.cols(); ++j) out << (j ? "," : "") << "w_" << j + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) out << (j ? "," : "") << format_double(rows(i, j));
    out << '\n';
  }
}

void write_kde_csv(const std::filesystem::path& path, const KdeGrid& grid) {
  auto out = open_out(path);
  out << "x,y,density\n";
  for (Eigen::Index a = 0; a < grid.xs.size(); ++a)
    for (Eigen::Index b = 0; b < grid.ys.size(); ++b)
      out << format_double(grid.xs[a]) << ',' << format_double(grid.ys[b]) << ',' << format_double(grid.density(a, b))
          << '\n';
}

}  // namespace deepboot
