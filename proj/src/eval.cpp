#include "sbm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sbm/error.hpp"
#include "sbm/json_io.hpp"

namespace sbm {

namespace {

std::size_t whole_samples(double duration_s, double dt, const char* what) {
  const double ratio = duration_s / dt;
  const double rounded = std::round(ratio);
  if (!(duration_s > 0.0) || rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw Error(ErrorCode::InvalidSpec, std::string(what) + " of " + format_double(duration_s) +
                                            " s is not a positive whole number of " + format_double(dt) + " s samples");
  }
  return static_cast<std::size_t>(rounded);
}

}  // namespace

std::size_t HorizonSpec::n_sched(double dt) const { return whole_samples(t_sched_s, dt, "t_sched"); }
std::size_t HorizonSpec::stride_samples(double dt) const { return whole_samples(eval_stride_s, dt, "eval_stride"); }

double moving_horizon_mse(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size() || y_true.empty()) {
    throw Error(ErrorCode::LengthMismatch, "window lengths " + std::to_string(y_true.size()) + " and " +
                                               std::to_string(y_pred.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double e = y_true[i] - y_pred[i];
    acc += e * e;
  }
  return acc / static_cast<double>(y_true.size());
}

std::size_t evaluation_count(std::size_t length, std::size_t origin, std::size_t n_sched, std::size_t stride) {
  if (origin + n_sched > length) return 0;
  return (length - origin - n_sched) / stride + 1;
}

namespace {

struct WindowPlan {
  std::size_t n_sched = 0;
  std::size_t stride = 0;
  std::size_t count = 0;
};

WindowPlan plan_windows(const ArxData& data, int order, double dt, const HorizonSpec& spec, std::size_t origin) {
  WindowPlan plan;
  plan.n_sched = spec.n_sched(dt);
  plan.stride = spec.stride_samples(dt);
  if (origin < static_cast<std::size_t>(order)) {
    throw Error(ErrorCode::InsufficientData, "origin sample " + std::to_string(origin) + " leaves fewer than " +
                                                 std::to_string(order) + " seed outputs");
  }
  plan.count = evaluation_count(data.length(), origin, plan.n_sched, plan.stride);
  if (plan.count == 0) {
    throw Error(ErrorCode::InsufficientData, "data of length " + std::to_string(data.length()) +
                                                 " does not cover one " + std::to_string(plan.n_sched) + "-sample window");
  }
  return plan;
}

MseSeries series_skeleton(const WindowPlan& plan, std::size_t origin, double dt) {
  MseSeries s;
  s.t_hours.resize(plan.count);
  s.start_sample.resize(plan.count);
  s.mse.resize(plan.count);
  for (std::size_t k = 0; k < plan.count; ++k) {
    s.start_sample[k] = origin + k * plan.stride;
    s.t_hours[k] = static_cast<double>(k * plan.stride) * dt / 3600.0;
  }
  return s;
}

// Free-run one window and score it. `scratch` must hold n_sched values.
double window_mse(int order, const double* theta, const ArxData& data, std::size_t start, std::size_t n_sched,
                  std::vector<std::span<const double>>& inputs, std::vector<double>& scratch) {
  const auto n = static_cast<std::size_t>(order);
  for (std::size_t i = 0; i < data.inputs.size(); ++i) inputs[i] = data.inputs[i].subspan(start - n, n + n_sched - 1);
  free_run_kernel(order, theta, data.output.subspan(start - n, n), inputs, scratch);
  return moving_horizon_mse(data.output.subspan(start, n_sched), scratch);
}

void check_model_data(int order, Eigen::Index params, const ArxData& data) {
  if (params != order + static_cast<Eigen::Index>(data.inputs.size()) * order) {
    throw Error(ErrorCode::DimensionMismatch, "model dimension does not match the data's input count");
  }
}

}  // namespace

std::vector<Eigen::VectorXd> adaptive_snapshots(const ParameterFilter& initial, int order, const ArxData& data,
                                                std::size_t origin, std::size_t stride, std::size_t count) {
  const auto n = static_cast<std::size_t>(order);
  ParameterFilter filter = initial;
  std::vector<Eigen::VectorXd> snaps;
  snaps.reserve(count);
  Eigen::VectorXd u(filter.theta().size());
  std::size_t t = origin;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t start = origin + k * stride;
    for (; t < start; ++t) {
      for (std::size_t j = 1; j <= n; ++j) u(static_cast<Eigen::Index>(j - 1)) = data.output[t - j];
      for (std::size_t i = 0; i < data.inputs.size(); ++i) {
        for (std::size_t j = 1; j <= n; ++j) u(static_cast<Eigen::Index>(n + i * n + j - 1)) = data.inputs[i][t - j];
      }
      filter.step(u, data.output[t]);
    }
    snaps.push_back(filter.theta());
  }
  return snaps;
}

MseSeries evaluate_moving_horizon(const ArxModel& model, const ArxData& data, double dt, const HorizonSpec& spec,
                                  std::size_t origin) {
  check_model_data(model.order, model.parameter_count(), data);
  const WindowPlan plan = plan_windows(data, model.order, dt, spec, origin);
  MseSeries s = series_skeleton(plan, origin, dt);
  const Eigen::VectorXd theta = model.theta();
  const auto count = static_cast<std::ptrdiff_t>(plan.count);
#pragma omp parallel
  {
    std::vector<std::span<const double>> inputs(data.inputs.size());
    std::vector<double> scratch(plan.n_sched);
#pragma omp for schedule(static)
    for (std::ptrdiff_t k = 0; k < count; ++k) {
      s.mse[static_cast<std::size_t>(k)] =
          window_mse(model.order, theta.data(), data, s.start_sample[static_cast<std::size_t>(k)], plan.n_sched, inputs, scratch);
    }
  }
  return s;
}

MseSeries evaluate_moving_horizon(const ParameterFilter& filter, int order, const ArxData& data, double dt,
                                  const HorizonSpec& spec, std::size_t origin) {
  check_model_data(order, filter.theta().size(), data);
  const WindowPlan plan = plan_windows(data, order, dt, spec, origin);
  MseSeries s = series_skeleton(plan, origin, dt);
  const auto snaps = adaptive_snapshots(filter, order, data, origin, plan.stride, plan.count);
  const auto count = static_cast<std::ptrdiff_t>(plan.count);
#pragma omp parallel
  {
    std::vector<std::span<const double>> inputs(data.inputs.size());
    std::vector<double> scratch(plan.n_sched);
#pragma omp for schedule(static)
    for (std::ptrdiff_t k = 0; k < count; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      s.mse[kk] = window_mse(order, snaps[kk].data(), data, s.start_sample[kk], plan.n_sched, inputs, scratch);
    }
  }
  return s;
}

namespace serial {

MseSeries evaluate_moving_horizon(const ArxModel& model, const ArxData& data, double dt, const HorizonSpec& spec,
                                  std::size_t origin) {
  check_model_data(model.order, model.parameter_count(), data);
  const WindowPlan plan = plan_windows(data, model.order, dt, spec, origin);
  MseSeries s = series_skeleton(plan, origin, dt);
  const Eigen::VectorXd theta = model.theta();
  std::vector<std::span<const double>> inputs(data.inputs.size());
  std::vector<double> scratch(plan.n_sched);
  for (std::size_t k = 0; k < plan.count; ++k) {
    s.mse[k] = window_mse(model.order, theta.data(), data, s.start_sample[k], plan.n_sched, inputs, scratch);
  }
  return s;
}

MseSeries evaluate_moving_horizon(const ParameterFilter& filter, int order, const ArxData& data, double dt,
                                  const HorizonSpec& spec, std::size_t origin) {
  check_model_data(order, filter.theta().size(), data);
  const WindowPlan plan = plan_windows(data, order, dt, spec, origin);
  MseSeries s = series_skeleton(plan, origin, dt);
  const auto snaps = adaptive_snapshots(filter, order, data, origin, plan.stride, plan.count);
  std::vector<std::span<const double>> inputs(data.inputs.size());
  std::vector<double> scratch(plan.n_sched);
  for (std::size_t k = 0; k < plan.count; ++k) {
    s.mse[k] = window_mse(order, snaps[k].data(), data, s.start_sample[k], plan.n_sched, inputs, scratch);
  }
  return s;
}

}  // namespace serial

MseSeries evaluate_moving_horizon(const ArxModel& model, const TimeSeriesFrame& data, const HorizonSpec& spec) {
  return evaluate_moving_horizon(model, arx_view(data, model.output_name), data.sample_interval_s(), spec,
                                 static_cast<std::size_t>(model.order));
}

MseSeries evaluate_moving_horizon(const ParameterFilter& filter, int order, const TimeSeriesFrame& data,
                                  const HorizonSpec& spec) {
  return evaluate_moving_horizon(filter, order, arx_view(data), data.sample_interval_s(), spec,
                                 static_cast<std::size_t>(order));
}

// ---------------------------------------------------------------------------

CrossDatasetStats cross_dataset_covariance(const std::vector<ArxModel>& models) {
  if (models.size() < 2) {
    throw Error(ErrorCode::TooFewModels, "need at least 2 models, got " + std::to_string(models.size()));
  }
  const auto& first = models.front();
  const Eigen::Index p = first.parameter_count();
  Eigen::MatrixXd thetas(static_cast<Eigen::Index>(models.size()), p);
  for (std::size_t m = 0; m < models.size(); ++m) {
    if (models[m].order != first.order || models[m].inputs != first.inputs) {
      throw Error(ErrorCode::DimensionMismatch, "model " + std::to_string(m) + " has a different order or input count");
    }
    thetas.row(static_cast<Eigen::Index>(m)) = models[m].theta().transpose();
  }
  CrossDatasetStats stats;
  // Averaging offsets from the first model keeps identical models exactly identical.
  const Eigen::RowVectorXd first_theta = thetas.row(0);
  stats.mean = (first_theta + (thetas.rowwise() - first_theta).colwise().mean()).transpose();
  const Eigen::MatrixXd centered = thetas.rowwise() - stats.mean.transpose();
  const double denom = static_cast<double>(models.size() - 1);
  stats.sigma = centered.transpose() * centered / denom;
  stats.scaled = thetas.array().rowwise() / stats.mean.transpose().array();
  const Eigen::RowVectorXd scaled_mean = stats.scaled.colwise().mean();
  stats.scaled_variance = ((stats.scaled.rowwise() - scaled_mean).array().square().colwise().sum() / denom).transpose();
  return stats;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

PhaseSummary summarize(const MseSeries& series, std::string name, double begin_days, double end_days) {
  PhaseSummary p;
  p.name = std::move(name);
  p.begin_days = begin_days;
  p.end_days = end_days;
  std::vector<double> picked;
  for (std::size_t k = 0; k < series.mse.size(); ++k) {
    const double d = series.t_hours[k] / 24.0;
    if (d >= begin_days - 1e-12 && d <= end_days + 1e-12) picked.push_back(series.mse[k]);
  }
  p.count = picked.size();
  if (picked.empty()) {
    p.median = p.mean = p.std = std::nan("");
    return p;
  }
  double sum = 0.0;
  for (double v : picked) sum += v;
  p.mean = sum / static_cast<double>(picked.size());
  double ss = 0.0;
  for (double v : picked) ss += (v - p.mean) * (v - p.mean);
  p.std = picked.size() > 1 ? std::sqrt(ss / static_cast<double>(picked.size() - 1)) : 0.0;
  p.median = median(std::move(picked));
  return p;
}

std::vector<PhaseSummary> phase_summaries(const MseSeries& series, double d_train_days, double t_sched_days) {
  const double mixed_from = std::max(0.0, d_train_days - t_sched_days);
  const double end = series.t_hours.empty() ? 0.0 : series.t_hours.back() / 24.0;
  const double eps = 1e-9;
  return {
      summarize(series, "train", 0.0, mixed_from),
      summarize(series, "mixed", mixed_from + eps, d_train_days - eps),
      summarize(series, "new", d_train_days, std::max(end, d_train_days)),
  };
}

// ---------------------------------------------------------------------------

void ExperimentSettings::validate() const {
  auto bad = [](const std::string& key, const std::string& why) {
    throw Error(ErrorCode::InvalidConfig, "'" + key + "': " + why);
  };
  if (!(d_train_days > 0.0)) bad("d_train_days", "must be positive");
  if (order < 1) bad("order", "must be >= 1");
  if (!(horizon.t_sched_s > 0.0)) bad("t_sched", "must be positive");
  if (!(horizon.eval_stride_s > 0.0)) bad("eval_stride", "must be positive");
  if (record_every < 1) bad("record_every", "must be >= 1");
  if (!(cutoff_hz > 0.0)) bad("cutoff_hz", "must be positive");
  if (tuning.r && !(*tuning.r > 0.0 && std::isfinite(*tuning.r))) bad("tuning.r", "must be positive");
  if (tuning.r && tuning.r_from_fit) bad("tuning.r", "conflicts with tuning.r_from_fit");
  try {
    savgol.validate();
  } catch (const Error& e) {
    bad("savgol", e.what());
  }
  try {
    roles.validate_shape();
  } catch (const Error& e) {
    bad("roles", e.what());
  }
}

ExperimentReport run_experiment(const TimeSeriesFrame& data, const std::vector<TimeSeriesFrame>& siblings,
                                const ExperimentSettings& settings) {
  settings.validate();
  if (settings.adaptive && !settings.sigma && siblings.empty()) {
    throw Error(ErrorCode::InvalidConfig, "'siblings': adaptive evaluation needs sibling datasets or an explicit sigma");
  }
  settings.roles.validate(data);
  const double dt = data.sample_interval_s();
  const auto n_train = static_cast<std::size_t>(std::llround(settings.d_train_days * 86400.0 / dt));
  if (n_train > data.length() || n_train <= static_cast<std::size_t>(settings.order)) {
    throw Error(ErrorCode::InsufficientData, "training window of " + std::to_string(n_train) +
                                                 " samples does not fit data of length " + std::to_string(data.length()));
  }

  const SbmPreprocessor pre = fit_sbm_preprocessor(slice_window(data, 0, n_train), settings.roles, settings.savgol,
                                                   settings.cutoff_hz);
  const TimeSeriesFrame sbm = build_sbm_dataset(data, pre);
  auto fit_window = [&](const TimeSeriesFrame& frame) {
    return fit_least_squares(build_regression(slice_window(frame, 0, n_train), settings.order));
  };

  ExperimentReport report;
  report.settings = settings;
  report.origin = static_cast<std::size_t>(settings.order);
  report.n_train = n_train;
  const double t_sched_days = settings.horizon.t_sched_s / 86400.0;
  report.phase_boundaries_days = {std::max(0.0, settings.d_train_days - t_sched_days), settings.d_train_days};
  report.model = fit_window(sbm);

  const ArxData view = arx_view(sbm);
  report.static_series = evaluate_moving_horizon(report.model, view, dt, settings.horizon, report.origin);
  report.static_summary = phase_summaries(report.static_series, settings.d_train_days, t_sched_days);

  if (settings.adaptive) {
    if (settings.sigma) {
      report.sigma = *settings.sigma;
    } else {
      std::vector<ArxModel> fits(siblings.size() + 1);
      fits[0] = report.model;
      const auto count = static_cast<std::ptrdiff_t>(siblings.size());
      std::vector<std::exception_ptr> failures(siblings.size());
#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        try {
          fits[ii + 1] = fit_window(build_sbm_dataset(siblings[ii], pre));
        } catch (...) {
          failures[ii] = std::current_exception();
        }
      }
      for (const auto& f : failures) {
        if (f) std::rethrow_exception(f);
      }
      report.sigma = cross_dataset_covariance(fits).sigma;
      report.sibling_count = siblings.size();
    }
    FilterTuning tuning = default_tuning(report.model.theta(), *report.sigma, n_train);
    if (settings.tuning.r) tuning.R = *settings.tuning.r;
    if (settings.tuning.r_from_fit) {
      if (!(report.model.residual_variance > 0.0)) {
        throw Error(ErrorCode::InvalidConfig, "'tuning.r_from_fit': static fit has zero residual variance");
      }
      tuning.R = report.model.residual_variance;
    }
    report.filter_r = tuning.R;
    const ParameterFilter filter(report.model.theta(), tuning);
    report.adaptive_series = evaluate_moving_horizon(filter, settings.order, view, dt, settings.horizon, report.origin);
    report.adaptive_summary = phase_summaries(*report.adaptive_series, settings.d_train_days, t_sched_days);
    ParameterFilter tracker = filter;
    report.trajectory = run_stream(tracker, view, settings.order, settings.record_every).trajectory;
  }
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  if (config.dataset.empty()) throw Error(ErrorCode::InvalidConfig, "'input': no dataset given");
  LoadOptions load = config.load;
  load.roles = config.settings.roles;
  const TimeSeriesFrame data = load_csv(config.dataset, load);
  std::vector<TimeSeriesFrame> siblings;
  for (const auto& p : config.siblings) siblings.push_back(load_csv(p, load));
  return run_experiment(data, siblings, config.settings);
}

void write_mse_csv(const MseSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << "t_hours,mse\n";
  for (std::size_t k = 0; k < series.mse.size(); ++k) {
    out << format_double(series.t_hours[k]) << ',' << format_double(series.mse[k]) << '\n';
  }
}

void write_report(const ExperimentReport& report, const std::filesystem::path& outdir) {
  std::filesystem::create_directories(outdir);
  write_json_file(to_json(report), outdir / "report.json");
  write_mse_csv(report.static_series, outdir / "mse_static.csv");
  if (report.adaptive_series) {
    write_mse_csv(*report.adaptive_series, outdir / "mse_adaptive.csv");
    write_trajectory_csv(report.trajectory, outdir / "trajectory.csv");
  }
}

}  // namespace sbm
