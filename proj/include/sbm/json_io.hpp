#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <json.hpp>

#include "sbm/arx.hpp"
#include "sbm/eval.hpp"
#include "sbm/preprocess.hpp"

namespace sbm {

using json = nlohmann::ordered_json;

json to_json(const Eigen::VectorXd& v);
json to_json(const Eigen::MatrixXd& m);  // array of rows
Eigen::VectorXd vector_from_json(const json& j);
Eigen::MatrixXd matrix_from_json(const json& j);

/// {order, inputs, a, b, sample_interval_s, residual_variance, input_names, output_name}
json to_json(const ArxModel& model);
ArxModel arx_model_from_json(const json& j);

/// {channels, means, scales}
json to_json(const Normalizer& norm);
Normalizer normalizer_from_json(const json& j);

/// {channels, means, loadings, evr, eigenvalues}
json to_json(const PcaModel& pca);
PcaModel pca_from_json(const json& j);

json to_json(const ChannelRoleMap& roles);
ChannelRoleMap roles_from_json(const json& j);

/// {roles, normalizer, pca, savgol, cutoff_hz}
json to_json(const SbmPreprocessor& pre);
SbmPreprocessor preprocessor_from_json(const json& j);

json to_json(const MseSeries& series);
json to_json(const PhaseSummary& summary);
json to_json(const ExperimentReport& report);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const json& j, const std::filesystem::path& path);

}  // namespace sbm
