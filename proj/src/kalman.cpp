#include "sbm/kalman.hpp"

#include <cmath>
#include <fstream>

#include "sbm/error.hpp"

namespace sbm {

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& m, double symmetry_tol, double negative_tol) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::DimensionMismatch, "matrix is not square");
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (asym > symmetry_tol * scale) {
    throw Error(ErrorCode::NotPSD, "matrix asymmetric by " + format_double(asym));
  }
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd values = eig.eigenvalues();
  if (values.size() > 0 && values.minCoeff() < -negative_tol * std::max(1.0, values.maxCoeff())) {
    throw Error(ErrorCode::NotPSD, "eigenvalue " + format_double(values.minCoeff()) + " is negative");
  }
  if (values.size() == 0 || values.minCoeff() >= 0.0) return sym;
  const Eigen::MatrixXd& v = eig.eigenvectors();
  Eigen::MatrixXd clipped = v * values.cwiseMax(0.0).asDiagonal() * v.transpose();
  return 0.5 * (clipped + clipped.transpose());
}

void FilterTuning::validate() const {
  const Eigen::Index d = Q.rows();
  if (Q.cols() != d || P0.rows() != d || P0.cols() != d) {
    throw Error(ErrorCode::DimensionMismatch, "Q and P0 must be square with the same dimension");
  }
  if (!(R > 0.0) || !std::isfinite(R)) throw Error(ErrorCode::InvalidSpec, "R must be positive");
  if (!(alpha > 0.0) || !(alpha < beta)) throw Error(ErrorCode::InvalidSpec, "need 0 < alpha < beta");
  if (!(divergence_guard > 0.0)) throw Error(ErrorCode::InvalidSpec, "divergence guard must be positive");
  for (const auto* m : {&Q, &P0}) {
    if (!m->allFinite()) throw Error(ErrorCode::NonFiniteInput, "tuning matrix has non-finite entries");
    if ((*m - m->transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m->cwiseAbs().maxCoeff())) {
      throw Error(ErrorCode::NotPSD, "tuning matrix is not symmetric");
    }
    if (d > 0 && Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(*m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() < -1e-12) {
      throw Error(ErrorCode::NotPSD, "tuning matrix has a negative eigenvalue");
    }
  }
}

FilterTuning default_tuning(const Eigen::VectorXd& theta0, const Eigen::MatrixXd& sigma, std::size_t n_train) {
  if (sigma.rows() != theta0.size() || sigma.cols() != theta0.size()) {
    throw Error(ErrorCode::DimensionMismatch, "Sigma is " + std::to_string(sigma.rows()) + "x" +
                                                  std::to_string(sigma.cols()) + ", theta0 has " +
                                                  std::to_string(theta0.size()) + " entries");
  }
  if (n_train < 1) throw Error(ErrorCode::InvalidSpec, "n_train must be >= 1");
  FilterTuning t;
  t.R = 1.0;
  t.P0 = (theta0.cwiseAbs() * 1e-3).asDiagonal();
  t.Q = project_psd(sigma / static_cast<double>(n_train));
  t.alpha = 1e-12;
  t.beta = 1e6 * (theta0.size() > 0 ? t.P0.diagonal().maxCoeff() : 1.0);
  if (!(t.beta > t.alpha)) t.beta = 1.0;  // theta0 == 0 leaves P0 = 0
  return t;
}

ParameterFilter::ParameterFilter(Eigen::VectorXd theta0, FilterTuning tuning)
    : theta_(std::move(theta0)), p_(tuning.P0), tuning_(std::move(tuning)) {
  tuning_.validate();
  if (theta_.size() != tuning_.dimension()) {
    throw Error(ErrorCode::DimensionMismatch, "theta0 has " + std::to_string(theta_.size()) +
                                                  " entries, tuning is " + std::to_string(tuning_.dimension()) + "-dimensional");
  }
  pu_.resize(theta_.size());
}

StepDiagnostics ParameterFilter::step(const Eigen::Ref<const Eigen::VectorXd>& u, double y) {
  if (u.size() != theta_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "regressor has " + std::to_string(u.size()) + " entries, filter has " +
                                                  std::to_string(theta_.size()));
  }
  if (!std::isfinite(y) || !u.allFinite()) throw Error(ErrorCode::NonFiniteInput, "regressor or output not finite");

  StepDiagnostics d;
  d.predicted = u.dot(theta_);
  d.innovation = y - d.predicted;
  pu_.noalias() = p_ * u;
  d.innovation_variance = tuning_.R + u.dot(pu_);
  const Eigen::VectorXd gain = pu_ / d.innovation_variance;
  d.gain_norm = gain.norm();

  Eigen::VectorXd next = theta_ + gain * d.innovation;
  if (!next.allFinite() || next.cwiseAbs().maxCoeff() > tuning_.divergence_guard) {
    throw Error(ErrorCode::DivergenceDetected, "parameter estimate exceeded " + format_double(tuning_.divergence_guard) +
                                                   " at step " + std::to_string(steps_ + 1));
  }
  theta_ = std::move(next);
  // (I - K u^T) P = P - K (u^T P)
  const Eigen::RowVectorXd ut_p = u.transpose() * p_;
  p_.noalias() -= gain * ut_p;
  p_ += tuning_.Q;
  p_ = 0.5 * (p_ + p_.transpose()).eval();
  ++steps_;
  last_innovation_ = d.innovation;
  return d;
}

StreamResult run_stream(ParameterFilter& filter, const ArxData& data, int order, std::size_t record_every) {
  if (record_every == 0) throw Error(ErrorCode::InvalidSpec, "record_every must be >= 1");
  if (data.length() <= static_cast<std::size_t>(order)) {
    throw Error(ErrorCode::TooShort, "stream needs more than " + std::to_string(order) + " samples");
  }
  const auto n = static_cast<std::size_t>(order);
  const Eigen::Index dim = order + static_cast<Eigen::Index>(data.inputs.size()) * order;
  if (dim != filter.theta().size()) {
    throw Error(ErrorCode::DimensionMismatch, "data and filter dimensions differ");
  }
  StreamResult result;
  result.innovations.reserve(data.length() - n);
  Eigen::VectorXd u(dim);
  for (std::size_t t = n; t < data.length(); ++t) {
    for (std::size_t j = 1; j <= n; ++j) u(static_cast<Eigen::Index>(j - 1)) = data.output[t - j];
    for (std::size_t i = 0; i < data.inputs.size(); ++i) {
      for (std::size_t j = 1; j <= n; ++j) u(static_cast<Eigen::Index>(n + i * n + j - 1)) = data.inputs[i][t - j];
    }
    const auto diag = filter.step(u, data.output[t]);
    result.innovations.push_back(diag.innovation);
    if ((t - n + 1) % record_every == 0) {
      result.trajectory.push_back({t, filter.theta(), filter.covariance().diagonal(), diag.innovation});
    }
  }
  return result;
}

StreamResult run_stream(ParameterFilter& filter, const TimeSeriesFrame& data, int order, std::size_t record_every,
                        const std::string& output_name) {
  return run_stream(filter, arx_view(data, output_name), order, record_every);
}

void write_trajectory_csv(const std::vector<TrajectoryPoint>& trajectory, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  const Eigen::Index k = trajectory.empty() ? 0 : trajectory.front().theta.size();
  out << 't';
  for (Eigen::Index i = 1; i <= k; ++i) out << ",theta_" << i;
  for (Eigen::Index i = 1; i <= k; ++i) out << ",pdiag_" << i;
  out << ",innovation\n";
  for (const auto& p : trajectory) {
    out << p.sample;
    for (Eigen::Index i = 0; i < k; ++i) out << ',' << format_double(p.theta(i));
    for (Eigen::Index i = 0; i < k; ++i) out << ',' << format_double(p.pdiag(i));
    out << ',' << format_double(p.innovation) << '\n';
  }
}

BoundsReport check_covariance_bounds(const ParameterFilter& filter) {
  const auto& tuning = filter.tuning();
  const Eigen::VectorXd values =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(filter.covariance(), Eigen::EigenvaluesOnly).eigenvalues();
  BoundsReport report;
  report.min_eigenvalue = values.minCoeff();
  report.max_eigenvalue = values.maxCoeff();
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) < tuning.alpha || values(i) > tuning.beta) report.offending.push_back(values(i));
  }
  if (report.min_eigenvalue < tuning.alpha) {
    report.status = BoundsStatus::BelowAlpha;
  } else if (report.max_eigenvalue > tuning.beta) {
    report.status = BoundsStatus::AboveBeta;
  }
  return report;
}

const char* to_string(BoundsStatus status) {
  switch (status) {
    case BoundsStatus::InBounds: return "InBounds";
    case BoundsStatus::BelowAlpha: return "BelowAlpha";
    case BoundsStatus::AboveBeta: return "AboveBeta";
  }
  return "Unknown";
}

}  // namespace sbm
