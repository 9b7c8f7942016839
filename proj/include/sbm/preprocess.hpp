#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sbm/dataio.hpp"

namespace sbm {

/// Per-channel z-score transform: (x - mean) / scale.
struct Normalizer {
  std::vector<std::string> channels;
  std::vector<double> means;
  std::vector<double> scales;

  std::size_t index_of(std::string_view channel) const;  // throws UnknownChannel
  std::vector<double> normalize(std::string_view channel, std::span<const double> values) const;
  std::vector<double> denormalize(std::string_view channel, std::span<const double> values) const;
  /// Normalizes every channel of `frame` the normalizer knows; others pass through.
  TimeSeriesFrame apply(const TimeSeriesFrame& frame) const;
};

/// Mean and sample standard deviation (n-1) of each named channel.
Normalizer fit_normalizer(const TimeSeriesFrame& frame, const std::vector<std::string>& channels);

inline constexpr double kDefaultCutoffHz = 1.0 / 3600.0;  // 1 per hour

/// Second-order section, a0 normalized to 1.
struct Biquad {
  double b0, b1, b2, a1, a2;
};

/// Second-order Butterworth low-pass by bilinear transform with prewarping,
/// so the magnitude at `cutoff_hz` is exactly 1/sqrt(2).
Biquad butterworth_lowpass(double sample_interval_s, double cutoff_hz);

/// Zero-phase (forward-backward) Butterworth low-pass. Ends are padded by odd
/// reflection and the section state starts at its steady state, so a constant
/// input comes back unchanged.
std::vector<double> lowpass_filter(std::span<const double> signal, double sample_interval_s,
                                   double cutoff_hz = kDefaultCutoffHz);

struct SavGolSpec {
  int window = 15;
  int poly_order = 2;

  void validate() const;  // throws InvalidSpec
};

/// Central-point smoothing weights.
std::vector<double> savgol_coefficients(const SavGolSpec& spec);

/// Weights that evaluate the window's least-squares polynomial at sample
/// `position` (0 .. window-1). The centre position gives savgol_coefficients.
std::vector<double> savgol_weights_at(const SavGolSpec& spec, int position);

/// Savitzky-Golay smoothing with polynomial extrapolation at both ends.
std::vector<double> savgol_filter(std::span<const double> signal, const SavGolSpec& spec);

namespace serial {
std::vector<double> savgol_filter(std::span<const double> signal, const SavGolSpec& spec);
}

struct PcaModel {
  std::vector<std::string> channels;
  Eigen::VectorXd means;                     // per channel
  Eigen::MatrixXd loadings;                  // channels x k, orthonormal columns
  Eigen::VectorXd eigenvalues;               // all, descending
  Eigen::VectorXd explained_variance_ratio;  // all, sums to 1

  Eigen::Index components() const { return loadings.cols(); }
};

/// Eigen-decomposition of the sample covariance of the named channels. The
/// largest-magnitude entry of each loading is made positive.
PcaModel pca_fit(const TimeSeriesFrame& frame, const std::vector<std::string>& channels, int k);

/// rows: n x channels. Returns n x k scores.
Eigen::MatrixXd pca_project(const PcaModel& model, const Eigen::MatrixXd& rows);
Eigen::MatrixXd pca_reconstruct(const PcaModel& model, const Eigen::MatrixXd& scores);

/// Gathers the named channels into an n x channels matrix.
Eigen::MatrixXd frame_rows(const TimeSeriesFrame& frame, const std::vector<std::string>& channels);

/// Everything needed to turn a raw plant record into model-ready channels.
/// The PCA is fitted on normalized correlated setpoints.
struct SbmPreprocessor {
  ChannelRoleMap roles;
  Normalizer normalizer;
  PcaModel pca;
  SavGolSpec savgol;
  double cutoff_hz = kDefaultCutoffHz;
};

/// Channel names of the model-ready frame, in order.
inline const std::vector<std::string>& sbm_channel_names() {
  static const std::vector<std::string> names{"u1", "u2", "u3", "u4", "y"};
  return names;
}

SbmPreprocessor fit_sbm_preprocessor(const TimeSeriesFrame& train, const ChannelRoleMap& roles,
                                     const SavGolSpec& savgol = {},
                                     double cutoff_hz = kDefaultCutoffHz);

/// u1 = phi1, u2 = phi2, u3 = SP1, u4 = T (normalized, then low-passed) and
/// y (normalized, then Savitzky-Golay smoothed). The excluded setpoint is dropped.
TimeSeriesFrame build_sbm_dataset(const TimeSeriesFrame& frame, const ChannelRoleMap& roles,
                                  const PcaModel& pca, const Normalizer& norm, const SavGolSpec& sg,
                                  double cutoff_hz = kDefaultCutoffHz);
TimeSeriesFrame build_sbm_dataset(const TimeSeriesFrame& frame, const SbmPreprocessor& pre);

}  // namespace sbm
