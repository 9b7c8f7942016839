#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <complex>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sbm/arx.hpp"
#include "sbm/dataio.hpp"

namespace sbm {

enum class DriftKind { None, Ramp, RandomWalk, Step };

/// Time variation of one entry of theta.
struct CoefficientDrift {
  std::size_t index = 0;       // position in theta
  DriftKind kind = DriftKind::None;
  double rate_per_day = 0.0;   // Ramp: absolute change per day
  double step_variance = 0.0;  // RandomWalk: increment variance per sample
  double amount = 0.0;         // Step: absolute change
  double start_day = 0.0;      // Ramp, Step: day the change begins
};

/// Ramp every lag of input `input` (0-based) by `relative_rate` of its base
/// value per day, starting at `start_day`.
std::vector<CoefficientDrift> relative_input_ramp(const ArxModel& truth, int input, double relative_rate,
                                                  double start_day = 0.0);

/// Step every lag of input `input` by `relative_change` of its base value at
/// `start_day`.
std::vector<CoefficientDrift> relative_input_step(const ArxModel& truth, int input, double relative_change,
                                                  double start_day);

/// Ground-truth ARX (order 3) of the plant in deviation units of
/// (latent factor 1, latent factor 2, SP1, T).
ArxModel default_plant_truth();

struct PlantConfig {
  std::uint64_t seed = 1;
  double duration_days = 30.0;
  double sample_interval_s = 60.0;
  int latent_factor_count = 2;
  double setpoint_noise = 0.05;       // white noise on each correlated setpoint
  double latent_step_std = 0.06;      // per-sample innovation of the latent setpoint processes
  double latent_reversion_days = 0.1; // mean-reversion time of those processes
  double smoothing_minutes = 0.0;     // two first-order lags applied to every latent process
  double temperature_amplitude = 5.0; // diurnal swing of T
  double temperature_drift_std = 0.01;
  std::vector<CoefficientDrift> drift;
  double nonlinearity_gain = 0.0;     // u1 enters as u1 + g * u1^2
  double output_noise_std = 0.01;
  ArxModel truth = default_plant_truth();

  /// Throws InvalidConfig.
  void validate() const;
};

/// True coefficients over time plus the exact signals the plant saw.
struct GroundTruth {
  ArxModel base;
  std::vector<CoefficientDrift> drift;
  std::vector<std::vector<double>> random_walk_paths;  // per drift entry; empty unless RandomWalk
  double sample_interval_s = 60.0;
  double nonlinearity_gain = 0.0;

  Eigen::VectorXd theta_at(std::size_t sample) const;
};

struct PlantDataset {
  /// sp_c1..sp_c6, sp_ind, sp_exc, T, W_fac
  TimeSeriesFrame frame;
  /// u1..u4, y in deviation units, as the output recursion used them
  /// (u1 before the nonlinearity is applied).
  TimeSeriesFrame derived;
  /// Output noise sequence e_t.
  std::vector<double> noise;
  GroundTruth truth;
};

PlantDataset generate_dataset(const PlantConfig& config);

/// Per-month datasets with distinct seeds. The b-rows of inputs 1-3 are
/// rescaled per month; a_j and the input-4 row stay fixed.
std::vector<PlantDataset> monthly_suite(const PlantConfig& config, int months = 12);

/// Hourly samples of the true theta, plus the static description.
void write_ground_truth(const GroundTruth& truth, std::size_t length, const std::filesystem::path& path);

/// Model-level generator: white Gaussian inputs driving a known ARX model.
struct ArxScenario {
  ArxModel truth;
  std::size_t length = 10080;
  double input_std = 1.0;
  double noise_std = 0.0;
  std::uint64_t seed = 1;
  std::vector<CoefficientDrift> drift;
};

struct ArxDataset {
  TimeSeriesFrame frame;  // u1..uM, y
  GroundTruth truth;
};

ArxDataset generate_arx_dataset(const ArxScenario& scenario);

/// Random stable model: poles drawn inside |z| <= max_pole, b entries uniform.
ArxModel random_stable_model(int order, int inputs, std::uint64_t seed, double max_pole = 0.9);

// Scenarios the acceptance suite is pinned to.
namespace scenarios {
/// Noise-free ARX(3, 4), 7 days at 1-minute sampling.
ArxScenario exact_recovery();
/// ARX(3, 4) with a strong third lag and output noise; 7 days.
ArxScenario noisy_order3(std::uint64_t seed);
/// 14-day plant whose input-1 gains drop by 40% at day 7.
PlantConfig drift_experiment();
/// Sibling months used for Sigma alongside drift_experiment().
PlantConfig drift_siblings();
/// Slowly varying, low-noise months for the cross-month parameter spread.
PlantConfig stability_months();
/// Full year with the default tuning.
PlantConfig year();
}  // namespace scenarios

}  // namespace sbm
