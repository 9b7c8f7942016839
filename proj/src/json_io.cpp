#include "sbm/json_io.hpp"

#include <fstream>

#include "sbm/error.hpp"

namespace sbm {

namespace {

json number(double v) {
  // JSON has no NaN/Inf; null stands in for a missing value.
  return std::isfinite(v) ? json(v) : json(nullptr);
}

template <typename T>
T get_key(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::ParseError, std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("key '") + key + "': " + e.what());
  }
}

}  // namespace

json to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

json to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(to_json(Eigen::VectorXd(m.row(r).transpose())));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::ParseError, "expected a numeric array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::ParseError, "expected a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::ParseError, "expected an array of rows");
  if (j.empty()) return {};
  const auto cols = j[0].size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != cols) throw Error(ErrorCode::ParseError, "ragged matrix rows");
    m.row(static_cast<Eigen::Index>(r)) = vector_from_json(j[r]).transpose();
  }
  return m;
}

json to_json(const ArxModel& model) {
  json j;
  j["order"] = model.order;
  j["inputs"] = model.inputs;
  j["a"] = to_json(model.a);
  j["b"] = to_json(model.b);
  j["sample_interval_s"] = model.sample_interval_s;
  j["residual_variance"] = number(model.residual_variance);
  j["input_names"] = model.input_names;
  j["output_name"] = model.output_name;
  return j;
}

ArxModel arx_model_from_json(const json& j) {
  const int order = get_key<int>(j, "order");
  const int inputs = get_key<int>(j, "inputs");
  ArxModel m = ArxModel::zeros(order, inputs);
  m.a = vector_from_json(j.at("a"));
  m.b = inputs > 0 ? matrix_from_json(j.at("b")) : Eigen::MatrixXd(0, order);
  if (m.a.size() != order || m.b.rows() != inputs || (inputs > 0 && m.b.cols() != order)) {
    throw Error(ErrorCode::DimensionMismatch, "coefficient arrays do not match order/inputs");
  }
  m.sample_interval_s = get_key<double>(j, "sample_interval_s");
  if (j.contains("residual_variance") && j["residual_variance"].is_number()) {
    m.residual_variance = j["residual_variance"].get<double>();
  }
  if (j.contains("input_names")) m.input_names = j["input_names"].get<std::vector<std::string>>();
  if (j.contains("output_name")) m.output_name = j["output_name"].get<std::string>();
  return m;
}

json to_json(const Normalizer& norm) {
  json j;
  j["channels"] = norm.channels;
  j["means"] = norm.means;
  j["scales"] = norm.scales;
  return j;
}

Normalizer normalizer_from_json(const json& j) {
  Normalizer n;
  n.channels = get_key<std::vector<std::string>>(j, "channels");
  n.means = get_key<std::vector<double>>(j, "means");
  n.scales = get_key<std::vector<double>>(j, "scales");
  if (n.means.size() != n.channels.size() || n.scales.size() != n.channels.size()) {
    throw Error(ErrorCode::DimensionMismatch, "normalizer arrays differ in length");
  }
  return n;
}

json to_json(const PcaModel& pca) {
  json j;
  j["channels"] = pca.channels;
  j["means"] = to_json(pca.means);
  // One array per component.
  j["loadings"] = to_json(Eigen::MatrixXd(pca.loadings.transpose()));
  j["evr"] = to_json(pca.explained_variance_ratio);
  j["eigenvalues"] = to_json(pca.eigenvalues);
  return j;
}

PcaModel pca_from_json(const json& j) {
  PcaModel p;
  p.channels = get_key<std::vector<std::string>>(j, "channels");
  p.means = vector_from_json(j.at("means"));
  p.loadings = matrix_from_json(j.at("loadings")).transpose();
  p.explained_variance_ratio = vector_from_json(j.at("evr"));
  if (j.contains("eigenvalues")) p.eigenvalues = vector_from_json(j.at("eigenvalues"));
  if (p.means.size() != static_cast<Eigen::Index>(p.channels.size()) || p.loadings.rows() != p.means.size()) {
    throw Error(ErrorCode::DimensionMismatch, "PCA arrays do not match the channel count");
  }
  return p;
}

json to_json(const ChannelRoleMap& roles) {
  json j;
  j["output"] = roles.output;
  j["correlated_setpoints"] = roles.correlated_setpoints;
  j["independent_setpoint"] = roles.independent_setpoint;
  j["excluded_setpoint"] = roles.excluded_setpoint;
  j["disturbance"] = roles.disturbance;
  return j;
}

ChannelRoleMap roles_from_json(const json& j) {
  ChannelRoleMap r;
  r.output = get_key<std::string>(j, "output");
  r.correlated_setpoints = get_key<std::vector<std::string>>(j, "correlated_setpoints");
  r.independent_setpoint = get_key<std::string>(j, "independent_setpoint");
  r.excluded_setpoint = get_key<std::string>(j, "excluded_setpoint");
  r.disturbance = get_key<std::string>(j, "disturbance");
  r.validate_shape();
  return r;
}

json to_json(const SbmPreprocessor& pre) {
  json j;
  j["roles"] = to_json(pre.roles);
  j["normalizer"] = to_json(pre.normalizer);
  j["pca"] = to_json(pre.pca);
  j["savgol"] = {{"window", pre.savgol.window}, {"poly_order", pre.savgol.poly_order}};
  j["cutoff_hz"] = pre.cutoff_hz;
  return j;
}

SbmPreprocessor preprocessor_from_json(const json& j) {
  SbmPreprocessor p;
  p.roles = roles_from_json(j.at("roles"));
  p.normalizer = normalizer_from_json(j.at("normalizer"));
  p.pca = pca_from_json(j.at("pca"));
  p.savgol.window = get_key<int>(j.at("savgol"), "window");
  p.savgol.poly_order = get_key<int>(j.at("savgol"), "poly_order");
  p.savgol.validate();
  p.cutoff_hz = get_key<double>(j, "cutoff_hz");
  return p;
}

json to_json(const MseSeries& series) {
  json t = json::array(), mse = json::array();
  for (std::size_t k = 0; k < series.mse.size(); ++k) {
    t.push_back(series.t_hours[k]);
    mse.push_back(number(series.mse[k]));
  }
  return json{{"t_hours", t}, {"mse", mse}};
}

json to_json(const PhaseSummary& s) {
  json j;
  j["phase"] = s.name;
  j["begin_days"] = s.begin_days;
  j["end_days"] = s.end_days;
  j["count"] = s.count;
  j["median"] = number(s.median);
  j["mean"] = number(s.mean);
  j["std"] = number(s.std);
  return j;
}

json to_json(const ExperimentReport& r) {
  const auto& s = r.settings;
  json cfg;
  cfg["roles"] = to_json(s.roles);
  cfg["d_train_days"] = s.d_train_days;
  cfg["order"] = s.order;
  cfg["t_sched_s"] = s.horizon.t_sched_s;
  cfg["eval_stride_s"] = s.horizon.eval_stride_s;
  cfg["adaptive"] = s.adaptive;
  cfg["savgol"] = {{"window", s.savgol.window}, {"poly_order", s.savgol.poly_order}};
  cfg["cutoff_hz"] = s.cutoff_hz;
  cfg["record_every"] = s.record_every;
  cfg["sigma_supplied"] = s.sigma.has_value();
  cfg["tuning"] = {{"r", s.tuning.r ? json(*s.tuning.r) : json(nullptr)}, {"r_from_fit", s.tuning.r_from_fit}};

  json j;
  j["config"] = cfg;
  j["origin_sample"] = r.origin;
  j["n_train"] = r.n_train;
  j["phase_boundaries_days"] = r.phase_boundaries_days;
  j["model"] = to_json(r.model);
  j["model_stable"] = r.model.is_stable();
  j["sibling_count"] = r.sibling_count;
  j["sigma"] = r.sigma ? to_json(*r.sigma) : json(nullptr);
  json st;
  st["series"] = to_json(r.static_series);
  st["summary"] = json::array();
  for (const auto& p : r.static_summary) st["summary"].push_back(to_json(p));
  j["static"] = st;
  if (r.adaptive_series) {
    json ad;
    ad["series"] = to_json(*r.adaptive_series);
    ad["summary"] = json::array();
    for (const auto& p : r.adaptive_summary) ad["summary"].push_back(to_json(p));
    ad["filter_r"] = r.filter_r ? json(*r.filter_r) : json(nullptr);
    ad["trajectory_file"] = "trajectory.csv";
    ad["final_theta"] = r.trajectory.empty() ? json(nullptr) : to_json(r.trajectory.back().theta);
    j["adaptive"] = ad;
  } else {
    j["adaptive"] = nullptr;
  }
  return j;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

}  // namespace sbm
