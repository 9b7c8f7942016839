#include "sbm/arx.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "sbm/error.hpp"

namespace sbm {

ArxModel ArxModel::zeros(int order, int inputs) {
  if (order < 1 || inputs < 0) {
    throw Error(ErrorCode::InvalidSpec, "order must be >= 1 and input count >= 0");
  }
  ArxModel m;
  m.order = order;
  m.inputs = inputs;
  m.a = Eigen::VectorXd::Zero(order);
  m.b = Eigen::MatrixXd::Zero(inputs, order);
  for (int i = 0; i < inputs; ++i) m.input_names.push_back("u" + std::to_string(i + 1));
  return m;
}

ArxModel ArxModel::from_theta(int order, int inputs, const Eigen::VectorXd& theta) {
  ArxModel m = zeros(order, inputs);
  m.set_theta(theta);
  return m;
}

Eigen::VectorXd ArxModel::theta() const {
  Eigen::VectorXd t(parameter_count());
  t.head(order) = -a;
  for (int i = 0; i < inputs; ++i) t.segment(order + i * order, order) = b.row(i).transpose();
  return t;
}

void ArxModel::set_theta(const Eigen::VectorXd& t) {
  if (t.size() != parameter_count()) {
    throw Error(ErrorCode::DimensionMismatch, "theta has " + std::to_string(t.size()) +
                                                  " entries, model needs " + std::to_string(parameter_count()));
  }
  a = -t.head(order);
  for (int i = 0; i < inputs; ++i) b.row(i) = t.segment(order + i * order, order).transpose();
}

double ArxModel::spectral_radius() const {
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(order, order);
  companion.col(0) = -a;
  if (order > 1) companion.topRightCorner(order - 1, order - 1).setIdentity();
  return companion.eigenvalues().cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------

ArxData arx_view(const TimeSeriesFrame& frame, const std::string& output_name) {
  ArxData data;
  data.output = frame.channel(output_name);
  for (const auto& ch : frame.channels()) {
    if (ch.name != output_name) data.inputs.emplace_back(ch.values);
  }
  return data;
}

namespace {

void check_regression_args(const ArxData& data, int order) {
  if (order < 1) throw Error(ErrorCode::InvalidSpec, "order must be >= 1");
  for (const auto& u : data.inputs) {
    if (u.size() != data.output.size()) throw Error(ErrorCode::LengthMismatch, "input and output lengths differ");
  }
  if (data.length() <= static_cast<std::size_t>(order)) {
    throw Error(ErrorCode::TooShort, "need more than " + std::to_string(order) + " samples, got " +
                                         std::to_string(data.length()));
  }
}

RegressionProblem empty_problem(const ArxData& data, int order) {
  RegressionProblem p;
  p.order = order;
  p.inputs = static_cast<int>(data.inputs.size());
  const auto rows = static_cast<Eigen::Index>(data.length()) - order;
  p.phi.resize(rows, order + static_cast<Eigen::Index>(p.inputs) * order);
  p.target.resize(rows);
  for (int i = 0; i < p.inputs; ++i) p.input_names.push_back("u" + std::to_string(i + 1));
  return p;
}

inline void fill_row(const ArxData& data, int order, Eigen::Index r, RegressionProblem& p) {
  const auto t = static_cast<std::size_t>(r + order);
  for (int j = 1; j <= order; ++j) p.phi(r, j - 1) = data.output[t - j];
  for (std::size_t i = 0; i < data.inputs.size(); ++i) {
    const auto base = order + static_cast<Eigen::Index>(i) * order;
    for (int j = 1; j <= order; ++j) p.phi(r, base + j - 1) = data.inputs[i][t - j];
  }
  p.target(r) = data.output[t];
}

}  // namespace

RegressionProblem build_regression(const ArxData& data, int order) {
  check_regression_args(data, order);
  RegressionProblem p = empty_problem(data, order);
  const Eigen::Index rows = p.phi.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index r = 0; r < rows; ++r) fill_row(data, order, r, p);
  return p;
}

namespace serial {
RegressionProblem build_regression(const ArxData& data, int order) {
  check_regression_args(data, order);
  RegressionProblem p = empty_problem(data, order);
  for (Eigen::Index r = 0; r < p.phi.rows(); ++r) fill_row(data, order, r, p);
  return p;
}
}  // namespace serial

RegressionProblem build_regression(const TimeSeriesFrame& frame, int order, const std::string& output_name) {
  RegressionProblem p = build_regression(arx_view(frame, output_name), order);
  p.sample_interval_s = frame.sample_interval_s();
  p.output_name = output_name;
  p.input_names.clear();
  for (const auto& ch : frame.channels()) {
    if (ch.name != output_name) p.input_names.push_back(ch.name);
  }
  return p;
}

ArxModel fit_least_squares(const RegressionProblem& problem) {
  const Eigen::Index cols = problem.phi.cols();
  if (problem.rows() < cols) {
    throw Error(ErrorCode::RankDeficient, std::to_string(problem.rows()) + " rows for " +
                                              std::to_string(cols) + " unknowns");
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(problem.phi);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  // R has the singular values of phi.
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(r).singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (!(smax > 0.0) || !(smin > 0.0) || smax / smin > kMaxConditionNumber) {
    throw Error(ErrorCode::RankDeficient,
                "regressor condition number " + format_double(smin > 0.0 ? smax / smin : INFINITY) +
                    " exceeds " + format_double(kMaxConditionNumber));
  }
  const Eigen::VectorXd theta = qr.solve(problem.target);

  ArxModel model = ArxModel::from_theta(problem.order, problem.inputs, theta);
  model.sample_interval_s = problem.sample_interval_s;
  model.input_names = problem.input_names;
  model.output_name = problem.output_name;
  model.residual_variance = sum_squared_error(problem, model) / static_cast<double>(problem.rows());
  return model;
}

double sum_squared_error(const RegressionProblem& problem, const ArxModel& model) {
  if (model.parameter_count() != problem.phi.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "model and regression problem dimensions differ");
  }
  return (problem.target - problem.phi * model.theta()).squaredNorm();
}

// ---------------------------------------------------------------------------

Eigen::VectorXd make_regressor(const ArxModel& model, const ArxHistory& h) {
  const auto n = static_cast<std::size_t>(model.order);
  if (h.y_lags.size() < n || h.u_lags.size() != static_cast<std::size_t>(model.inputs)) {
    throw Error(ErrorCode::InsufficientHistory, "history does not cover the model order/inputs");
  }
  Eigen::VectorXd phi(model.parameter_count());
  for (std::size_t j = 0; j < n; ++j) phi(static_cast<Eigen::Index>(j)) = h.y_lags[j];
  for (std::size_t i = 0; i < h.u_lags.size(); ++i) {
    if (h.u_lags[i].size() < n) throw Error(ErrorCode::InsufficientHistory, "input history too short");
    for (std::size_t j = 0; j < n; ++j) phi(static_cast<Eigen::Index>(n + i * n + j)) = h.u_lags[i][j];
  }
  return phi;
}

double predict_one_step(const ArxModel& model, const ArxHistory& history) {
  return make_regressor(model, history).dot(model.theta());
}

void free_run_kernel(int order, const double* theta, std::span<const double> initial_y,
                     const std::vector<std::span<const double>>& inputs, std::span<double> out) {
  const auto n = static_cast<std::size_t>(order);
  const std::size_t horizon = out.size();
  if (initial_y.size() != n) {
    throw Error(ErrorCode::InsufficientHistory, "need exactly " + std::to_string(n) + " initial outputs");
  }
  for (const auto& u : inputs) {
    if (horizon > 0 && u.size() < n + horizon - 1) {
      throw Error(ErrorCode::InsufficientHistory, "inputs do not cover the horizon");
    }
  }
  // y at offset s (s = 0 is t0-N) is initial_y[s] for s < N, out[s-N] after.
  auto y_at = [&](std::size_t s) { return s < n ? initial_y[s] : out[s - n]; };
  for (std::size_t k = 0; k < horizon; ++k) {
    const std::size_t s = n + k;
    double acc = 0.0;
    for (std::size_t j = 1; j <= n; ++j) acc += theta[j - 1] * y_at(s - j);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const double* th = theta + n + i * n;
      const double* u = inputs[i].data();
      for (std::size_t j = 1; j <= n; ++j) acc += th[j - 1] * u[s - j];
    }
    out[k] = acc;
  }
}

std::vector<double> simulate_free_run(const ArxModel& model, std::span<const double> initial_y,
                                      const std::vector<std::span<const double>>& inputs, std::size_t horizon) {
  if (inputs.size() != static_cast<std::size_t>(model.inputs)) {
    throw Error(ErrorCode::DimensionMismatch, "model has " + std::to_string(model.inputs) + " inputs, got " +
                                                  std::to_string(inputs.size()));
  }
  const Eigen::VectorXd theta = model.theta();
  std::vector<double> out(horizon);
  free_run_kernel(model.order, theta.data(), initial_y, inputs, out);
  return out;
}

double naic(const RegressionProblem& problem, const ArxModel& model) {
  const auto n = static_cast<double>(problem.rows());
  const auto k = static_cast<double>(model.parameter_count());
  const double mse = std::max(sum_squared_error(problem, model) / n, std::numeric_limits<double>::min());
  return std::log(mse) + 2.0 * k / n;
}

OrderSelection select_order(const TimeSeriesFrame& data, const std::vector<int>& orders,
                            const std::vector<double>& d_train_days, const std::string& output_name) {
  if (orders.empty() || d_train_days.empty()) throw Error(ErrorCode::InvalidSpec, "no candidate orders or D_train values");
  const auto per_day = static_cast<double>(samples_per_day(data));
  const int max_order = *std::max_element(orders.begin(), orders.end());
  if (*std::min_element(orders.begin(), orders.end()) < 1) throw Error(ErrorCode::InvalidSpec, "orders must be >= 1");

  OrderSelection sel;
  sel.orders = orders;
  std::vector<std::size_t> lengths;
  for (double d : d_train_days) {
    const auto len = static_cast<std::size_t>(std::llround(d * per_day));
    if (len > data.length() || len <= static_cast<std::size_t>(max_order)) {
      throw Error(ErrorCode::TooShort, "D_train of " + format_double(d) + " days needs " + std::to_string(len) +
                                           " samples, frame has " + std::to_string(data.length()));
    }
    lengths.push_back(len);
  }
  for (int n : orders) {
    for (double d : d_train_days) sel.table.push_back({n, d, 0, 0.0, false});
  }

  const ArxData full = arx_view(data, output_name);
  const auto cells = static_cast<std::ptrdiff_t>(sel.table.size());
  std::vector<std::exception_ptr> failures(sel.table.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < cells; ++c) {
    auto& cell = sel.table[static_cast<std::size_t>(c)];
    const std::size_t len = lengths[static_cast<std::size_t>(c) % d_train_days.size()];
    ArxData window{{}, full.output.first(len)};
    for (const auto& u : full.inputs) window.inputs.push_back(u.first(len));
    try {
      const RegressionProblem problem = serial::build_regression(window, cell.order);
      cell.rows = problem.rows();
      cell.naic = naic(problem, fit_least_squares(problem));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::RankDeficient) {
        cell.rank_deficient = true;
        cell.naic = std::numeric_limits<double>::quiet_NaN();
      } else {
        failures[static_cast<std::size_t>(c)] = std::current_exception();
      }
    } catch (...) {
      failures[static_cast<std::size_t>(c)] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t o = 0; o < orders.size(); ++o) {
    double sum = 0.0;
    bool excluded = false;
    for (std::size_t d = 0; d < d_train_days.size(); ++d) {
      const auto& cell = sel.table[o * d_train_days.size() + d];
      excluded = excluded || cell.rank_deficient;
      sum += cell.naic;
    }
    const double mean = excluded ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(d_train_days.size());
    sel.mean_naic.push_back(mean);
    if (!excluded) best = std::min(best, mean);
  }
  if (!std::isfinite(best)) throw Error(ErrorCode::RankDeficient, "every candidate order is rank deficient");

  const double limit = best + kOrderTieTolerance * std::abs(best);
  sel.chosen = 0;
  for (std::size_t o = 0; o < orders.size(); ++o) {
    const double m = sel.mean_naic[o];
    if (!std::isnan(m) && m <= limit && (sel.chosen == 0 || orders[o] < sel.chosen)) sel.chosen = orders[o];
  }
  return sel;
}

// ---------------------------------------------------------------------------

StateSpace to_state_space(const ArxModel& model) {
  const int n = model.order;
  StateSpace ss;
  ss.A = Eigen::MatrixXd::Zero(n, n);
  ss.A.col(0) = -model.a;
  if (n > 1) ss.A.topRightCorner(n - 1, n - 1).setIdentity();
  ss.B = model.b.transpose();
  ss.C = Eigen::MatrixXd::Zero(1, n);
  ss.C(0, 0) = 1.0;
  ss.D = Eigen::MatrixXd::Zero(1, model.inputs);
  return ss;
}

Eigen::VectorXd companion_state(const ArxModel& model, std::span<const double> initial_y,
                                const std::vector<std::span<const double>>& inputs) {
  const auto n = static_cast<std::size_t>(model.order);
  if (initial_y.size() != n || inputs.size() != static_cast<std::size_t>(model.inputs)) {
    throw Error(ErrorCode::InsufficientHistory, "history does not match the model");
  }
  for (const auto& u : inputs) {
    if (u.size() < n) throw Error(ErrorCode::InsufficientHistory, "input history too short");
  }
  // x_k(t0) = sum_{j=k..N} (-a_j y_{t0-1-(j-k)} + b_{.,j} u_{t0-1-(j-k)}); lag m sits at index N-m.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(model.order);
  for (std::size_t k = 1; k <= n; ++k) {
    double acc = 0.0;
    for (std::size_t j = k; j <= n; ++j) {
      const std::size_t idx = n - (1 + j - k);
      acc -= model.a(static_cast<Eigen::Index>(j - 1)) * initial_y[idx];
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        acc += model.b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1)) * inputs[i][idx];
      }
    }
    x(static_cast<Eigen::Index>(k - 1)) = acc;
  }
  return x;
}

std::vector<double> simulate_state_space(const StateSpace& ss, Eigen::VectorXd x,
                                         const std::vector<std::span<const double>>& inputs, std::size_t horizon) {
  const auto m = static_cast<std::size_t>(ss.B.cols());
  if (inputs.size() != m || x.size() != ss.A.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "state or input dimension does not match the realization");
  }
  for (const auto& u : inputs) {
    if (horizon > 0 && u.size() < horizon - 1) throw Error(ErrorCode::InsufficientHistory, "inputs do not cover the horizon");
  }
  std::vector<double> out(horizon);
  Eigen::VectorXd u(static_cast<Eigen::Index>(m));
  for (std::size_t t = 0; t < horizon; ++t) {
    const bool have_u = t + 1 < horizon || std::all_of(inputs.begin(), inputs.end(), [&](auto s) { return s.size() > t; });
    for (std::size_t i = 0; i < m; ++i) u(static_cast<Eigen::Index>(i)) = have_u ? inputs[i][t] : 0.0;
    out[t] = (ss.C * x + ss.D * u)(0);
    x = ss.A * x + ss.B * u;
  }
  return out;
}

}  // namespace sbm
