#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <vector>

#include "sbm/arx.hpp"

namespace sbm {

struct FilterTuning {
  Eigen::MatrixXd Q;   // random-walk covariance of theta per step
  double R = 1.0;      // residual variance
  Eigen::MatrixXd P0;  // initial parameter covariance
  double alpha = 1e-12;
  double beta = 1.0;
  double divergence_guard = 1e6;  // largest allowed |theta_hat| component

  Eigen::Index dimension() const { return Q.rows(); }
  /// Throws DimensionMismatch / NotPSD / InvalidSpec.
  void validate() const;
};

/// Symmetric part of `m` with negative eigenvalues clipped to zero. Throws
/// NotPSD if `m` is asymmetric beyond `symmetry_tol` or has an eigenvalue
/// below -`negative_tol` * max(1, largest eigenvalue).
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& m, double symmetry_tol = 1e-12,
                            double negative_tol = 1e-9);

/// R = 1, P0 = diag(|theta0|) * 0.1%, Q = Sigma / n_train (clipped to PSD),
/// alpha = 1e-12, beta = 1e6 * max diag(P0).
FilterTuning default_tuning(const Eigen::VectorXd& theta0, const Eigen::MatrixXd& sigma, std::size_t n_train);

struct StepDiagnostics {
  double predicted = 0.0;   // u^T theta_{t-1}
  double innovation = 0.0;  // y - predicted
  double innovation_variance = 0.0;  // R + u^T P u
  double gain_norm = 0.0;
};

/// Kalman filter over the parameter vector of a linear-in-parameters model
/// whose parameters follow a random walk:
///
///   yhat_t  = u_t^T theta_{t-1}
///   K_t     = P_{t-1} u_t / (R + u_t^T P_{t-1} u_t)
///   theta_t = theta_{t-1} + K_t (y_t - yhat_t)
///   P_t     = (I - K_t u_t^T) P_{t-1} + Q,  then P <- (P + P^T) / 2
///
/// Steps are strictly sequential. Copies are independent snapshots.
class ParameterFilter {
 public:
  ParameterFilter(Eigen::VectorXd theta0, FilterTuning tuning);

  /// Throws NonFiniteInput or DivergenceDetected; on error the state is unchanged.
  StepDiagnostics step(const Eigen::Ref<const Eigen::VectorXd>& regressor, double y);

  const Eigen::VectorXd& theta() const noexcept { return theta_; }
  const Eigen::MatrixXd& covariance() const noexcept { return p_; }
  const FilterTuning& tuning() const noexcept { return tuning_; }
  std::size_t step_count() const noexcept { return steps_; }
  double last_innovation() const noexcept { return last_innovation_; }

 private:
  Eigen::VectorXd theta_;
  Eigen::MatrixXd p_;
  FilterTuning tuning_;
  std::size_t steps_ = 0;
  double last_innovation_ = 0.0;
  Eigen::VectorXd pu_;  // scratch
};

struct TrajectoryPoint {
  std::size_t sample = 0;  // index into the streamed data
  Eigen::VectorXd theta;
  Eigen::VectorXd pdiag;
  double innovation = 0.0;
};

struct StreamResult {
  std::vector<TrajectoryPoint> trajectory;
  std::vector<double> innovations;  // one per step, for samples order .. length-1
};

/// Steps the filter at every sample t >= order using measured lagged outputs.
/// Records theta and diag(P) after every `record_every`-th step.
StreamResult run_stream(ParameterFilter& filter, const ArxData& data, int order, std::size_t record_every = 1);
StreamResult run_stream(ParameterFilter& filter, const TimeSeriesFrame& data, int order,
                        std::size_t record_every = 1, const std::string& output_name = "y");

/// Writes columns t, theta_1..k, pdiag_1..k, innovation.
void write_trajectory_csv(const std::vector<TrajectoryPoint>& trajectory, const std::filesystem::path& path);

enum class BoundsStatus { InBounds, BelowAlpha, AboveBeta };

struct BoundsReport {
  BoundsStatus status = BoundsStatus::InBounds;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  std::vector<double> offending;  // eigenvalues outside [alpha, beta]
};

/// Compares the spectrum of P with alpha and beta. Never modifies the filter.
BoundsReport check_covariance_bounds(const ParameterFilter& filter);

const char* to_string(BoundsStatus status);

}  // namespace sbm
