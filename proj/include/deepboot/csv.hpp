#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "deepboot/dataset.hpp"
#include "deepboot/metrics.hpp"
#include "deepboot/sample_batch.hpp"

namespace deepboot {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Header `method,beta,theta_1,...,theta_p`, one draw per row.
void write_sample_batch_csv(const std::filesystem::path& path, const SampleBatch& batch);
SampleBatch read_sample_batch_csv(const std::filesystem::path& path);

/// First line `# {json provenance}`, then `y,x_1,...,x_p`.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data, const nlohmann::json& provenance);
struct LoadedDataset {
  Dataset data;
  nlohmann::json provenance;
};
LoadedDataset read_dataset_csv(const std::filesystem::path& path);

/// `epoch,objective` with epochs from 1.
void write_trace_csv(const std::filesystem::path& path, const std::vector<double>& trace);

/// `chain,iteration,beta,theta_1,...` over retained iterations.
void write_chain_csv(const std::filesystem::path& path, const std::vector<Eigen::MatrixXd>& chains);

/// One compact weight draw per row: `w_1,...,w_m`.
void write_weights_csv(const std::filesystem::path& path, const Eigen::MatrixXd& rows);

/// `x,y,density` over the grid.
void write_kde_csv(const std::filesystem::path& path, const KdeGrid& grid);

}  // namespace deepboot
