#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbm/arx.hpp"
#include "sbm/dataio.hpp"
#include "sbm/kalman.hpp"
#include "sbm/preprocess.hpp"

namespace sbm {

struct HorizonSpec {
  double t_sched_s = 4.0 * 86400.0;
  double eval_stride_s = 3600.0;

  /// Samples per scheduling window; throws InvalidSpec unless integral.
  std::size_t n_sched(double sample_interval_s) const;
  std::size_t stride_samples(double sample_interval_s) const;
};

/// Mean squared error over one window, divisor = window length.
double moving_horizon_mse(std::span<const double> y_true, std::span<const double> y_pred);

/// Forecast accuracy at each evaluation time. Evaluation time k starts at
/// sample origin + k * stride; its window covers n_sched samples from there,
/// seeded with the N measured outputs just before it.
struct MseSeries {
  std::vector<double> t_hours;            // relative to the origin sample
  std::vector<std::size_t> start_sample;  // first predicted sample
  std::vector<double> mse;
};

/// Number of evaluation points that fit in `length` samples.
std::size_t evaluation_count(std::size_t length, std::size_t origin, std::size_t n_sched, std::size_t stride);

/// Static model: every window uses the same parameters.
MseSeries evaluate_moving_horizon(const ArxModel& model, const ArxData& data, double sample_interval_s,
                                  const HorizonSpec& spec, std::size_t origin);
MseSeries evaluate_moving_horizon(const ArxModel& model, const TimeSeriesFrame& data, const HorizonSpec& spec);

/// Adaptive model: the filter is stepped over samples origin .. s-1 before
/// the window starting at s, and its estimate is frozen for that window.
/// `filter` is the state at the origin (nothing stepped yet).
MseSeries evaluate_moving_horizon(const ParameterFilter& filter, int order, const ArxData& data,
                                  double sample_interval_s, const HorizonSpec& spec, std::size_t origin);
MseSeries evaluate_moving_horizon(const ParameterFilter& filter, int order, const TimeSeriesFrame& data,
                                  const HorizonSpec& spec);

/// Parameter snapshots the adaptive evaluation uses, one per evaluation time.
std::vector<Eigen::VectorXd> adaptive_snapshots(const ParameterFilter& filter, int order, const ArxData& data,
                                                std::size_t origin, std::size_t stride, std::size_t count);

namespace serial {
MseSeries evaluate_moving_horizon(const ArxModel& model, const ArxData& data, double sample_interval_s,
                                  const HorizonSpec& spec, std::size_t origin);
MseSeries evaluate_moving_horizon(const ParameterFilter& filter, int order, const ArxData& data,
                                  double sample_interval_s, const HorizonSpec& spec, std::size_t origin);
}  // namespace serial

struct CrossDatasetStats {
  Eigen::MatrixXd sigma;           // sample covariance of theta (n-1)
  Eigen::VectorXd mean;            // mean theta
  Eigen::MatrixXd scaled;          // models x params, theta / mean
  Eigen::VectorXd scaled_variance; // variance of each scaled column
};

CrossDatasetStats cross_dataset_covariance(const std::vector<ArxModel>& models);

struct PhaseSummary {
  std::string name;
  double begin_days = 0.0;  // inclusive
  double end_days = 0.0;    // inclusive
  std::size_t count = 0;
  double median = 0.0;
  double mean = 0.0;
  double std = 0.0;         // sample standard deviation
};

double median(std::vector<double> values);

/// Summary of the series restricted to begin_days <= t <= end_days.
PhaseSummary summarize(const MseSeries& series, std::string name, double begin_days, double end_days);

/// train: [0, D_train - t_sched], mixed: (D_train - t_sched, D_train), new: [D_train, end].
std::vector<PhaseSummary> phase_summaries(const MseSeries& series, double d_train_days, double t_sched_days);

/// Departures from default_tuning. Only R can be changed; Q and P0 always
/// follow the default rules.
struct TuningOverrides {
  std::optional<double> r;        // explicit residual variance
  bool r_from_fit = false;        // R = residual variance of the static fit

  bool any() const { return r.has_value() || r_from_fit; }
};

struct ExperimentSettings {
  ChannelRoleMap roles = default_roles();
  double d_train_days = 7.0;
  int order = 3;
  HorizonSpec horizon;
  bool adaptive = true;
  SavGolSpec savgol;
  double cutoff_hz = kDefaultCutoffHz;
  std::optional<Eigen::MatrixXd> sigma;  // overrides sibling-derived Sigma
  TuningOverrides tuning;
  std::size_t record_every = 60;

  /// Throws InvalidConfig naming the offending key.
  void validate() const;
};

struct ExperimentReport {
  ExperimentSettings settings;
  std::size_t origin = 0;
  std::size_t n_train = 0;
  std::vector<double> phase_boundaries_days;
  ArxModel model;
  std::optional<Eigen::MatrixXd> sigma;
  std::size_t sibling_count = 0;
  MseSeries static_series;
  std::vector<PhaseSummary> static_summary;
  std::optional<MseSeries> adaptive_series;
  std::vector<PhaseSummary> adaptive_summary;
  std::optional<double> filter_r;  // R the filter ran with
  std::vector<TrajectoryPoint> trajectory;
};

/// Preprocessing and the static fit use the first D_train days of `data`.
/// Siblings are preprocessed with the same transform and fitted the same way;
/// together with the primary fit they give Sigma for the filter tuning.
ExperimentReport run_experiment(const TimeSeriesFrame& data, const std::vector<TimeSeriesFrame>& siblings,
                                const ExperimentSettings& settings);

struct ExperimentConfig {
  std::filesystem::path dataset;
  std::vector<std::filesystem::path> siblings;
  ExperimentSettings settings;
  LoadOptions load;
};

ExperimentReport run_experiment(const ExperimentConfig& config);

/// report.json, mse_static.csv and (when adaptive) mse_adaptive.csv and trajectory.csv.
void write_report(const ExperimentReport& report, const std::filesystem::path& outdir);
void write_mse_csv(const MseSeries& series, const std::filesystem::path& path);

}  // namespace sbm
