#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "sbm/dataio.hpp"

namespace sbm {

/// Linear ARX model with one order N for the autoregressive part and for
/// every input:
///
///   y_t + sum_j a_j y_{t-j} = sum_i sum_j b_{i,j} u_{i,t-j} + e_t,  j = 1..N
///
/// The parameter vector is theta = [-a_1..-a_N, b_{1,1}..b_{1,N}, ..., b_{M,N}].
struct ArxModel {
  int order = 0;
  int inputs = 0;
  Eigen::VectorXd a;  // order
  Eigen::MatrixXd b;  // inputs x order
  double sample_interval_s = 60.0;
  std::vector<std::string> input_names;
  std::string output_name = "y";
  double residual_variance = 0.0;

  static ArxModel zeros(int order, int inputs);
  static ArxModel from_theta(int order, int inputs, const Eigen::VectorXd& theta);

  Eigen::Index parameter_count() const { return order + static_cast<Eigen::Index>(inputs) * order; }
  Eigen::VectorXd theta() const;
  void set_theta(const Eigen::VectorXd& theta);

  /// Largest root magnitude of z^N + a_1 z^{N-1} + ... + a_N.
  double spectral_radius() const;
  bool is_stable() const { return spectral_radius() < 1.0; }
};

/// Borrowed view of model-ready data: M input series and the output series,
/// all the same length.
struct ArxData {
  std::vector<std::span<const double>> inputs;
  std::span<const double> output;

  std::size_t length() const { return output.size(); }
};

/// Output is the channel called `output_name`; every other channel is an
/// input, in frame order.
ArxData arx_view(const TimeSeriesFrame& frame, const std::string& output_name = "y");

struct RegressionProblem {
  int order = 0;
  int inputs = 0;
  Eigen::MatrixXd phi;     // rows: [y_{t-1}..y_{t-N}, u_{1,t-1}..u_{1,t-N}, ..., u_{M,t-N}]
  Eigen::VectorXd target;  // y_t
  double sample_interval_s = 60.0;
  std::vector<std::string> input_names;
  std::string output_name = "y";

  Eigen::Index rows() const { return phi.rows(); }
};

/// One row per t = N .. length-1.
RegressionProblem build_regression(const ArxData& data, int order);
RegressionProblem build_regression(const TimeSeriesFrame& frame, int order,
                                   const std::string& output_name = "y");

namespace serial {
RegressionProblem build_regression(const ArxData& data, int order);
}

/// Singular-value ratio above which the regressor matrix counts as rank deficient.
inline constexpr double kMaxConditionNumber = 1e10;

/// Least squares by Householder QR. residual_variance = SSE / rows.
ArxModel fit_least_squares(const RegressionProblem& problem);

double sum_squared_error(const RegressionProblem& problem, const ArxModel& model);

/// Lagged values, most recent first: y_lags[0] = y_{t-1}, u_lags[i][0] = u_{i,t-1}.
struct ArxHistory {
  std::vector<double> y_lags;
  std::vector<std::vector<double>> u_lags;
};

Eigen::VectorXd make_regressor(const ArxModel& model, const ArxHistory& history);
double predict_one_step(const ArxModel& model, const ArxHistory& history);

/// Free-run simulation from time t0 for `horizon` steps, feeding predictions
/// back as lagged outputs.
///   initial_y: y_{t0-N} .. y_{t0-1} (chronological)
///   inputs[i]: u_i from t0-N onwards, at least N + horizon - 1 samples
/// Returns yhat_{t0} .. yhat_{t0+horizon-1}.
std::vector<double> simulate_free_run(const ArxModel& model, std::span<const double> initial_y,
                                      const std::vector<std::span<const double>>& inputs,
                                      std::size_t horizon);

/// Same recursion with theta supplied directly; writes into `out`.
void free_run_kernel(int order, const double* theta, std::span<const double> initial_y,
                     const std::vector<std::span<const double>>& inputs, std::span<double> out);

/// ln(SSE/n) + 2k/n with n = rows and k = parameter count.
double naic(const RegressionProblem& problem, const ArxModel& model);

struct OrderSelection {
  struct Cell {
    int order = 0;
    double d_train_days = 0.0;
    Eigen::Index rows = 0;
    double naic = 0.0;  // NaN when the fit was rank deficient
    bool rank_deficient = false;
  };
  std::vector<Cell> table;        // orders x d_train, order-major
  std::vector<int> orders;
  std::vector<double> mean_naic;  // per order, NaN if any cell was rank deficient
  int chosen = 0;
};

/// Relative nAIC margin inside which the smaller order wins.
inline constexpr double kOrderTieTolerance = 0.01;

/// nAIC for every (order, D_train) cell, each fitted on the first D_train days.
/// Picks the smallest order whose mean nAIC is within 1% of the best mean.
/// Orders whose regressors are rank deficient (data explained exactly by a
/// smaller model) are excluded from the choice.
OrderSelection select_order(const TimeSeriesFrame& data, const std::vector<int>& orders,
                            const std::vector<double>& d_train_days, const std::string& output_name = "y");

/// Observable companion realization: x_{t+1} = A x_t + B u_t, y_t = C x_t + D u_t.
struct StateSpace {
  Eigen::MatrixXd A, B, C, D;
};

StateSpace to_state_space(const ArxModel& model);

/// State at t0 reproducing the ARX recursion given the same history as
/// simulate_free_run (initial_y and the first N samples of each input).
Eigen::VectorXd companion_state(const ArxModel& model, std::span<const double> initial_y,
                                const std::vector<std::span<const double>>& inputs);

/// inputs[i] starts at t0; returns y_{t0} .. y_{t0+horizon-1}.
std::vector<double> simulate_state_space(const StateSpace& ss, Eigen::VectorXd x0,
                                         const std::vector<std::span<const double>>& inputs,
                                         std::size_t horizon);

}  // namespace sbm
