#include "sbm/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sbm/error.hpp"

namespace sbm {

// ---------------------------------------------------------------------------
// Normalization

std::size_t Normalizer::index_of(std::string_view channel) const {
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] == channel) return i;
  }
  throw Error(ErrorCode::UnknownChannel, "normalizer has no channel '" + std::string(channel) + "'");
}

std::vector<double> Normalizer::normalize(std::string_view channel, std::span<const double> values) const {
  const auto i = index_of(channel);
  std::vector<double> out(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) out[k] = (values[k] - means[i]) / scales[i];
  return out;
}

std::vector<double> Normalizer::denormalize(std::string_view channel, std::span<const double> values) const {
  const auto i = index_of(channel);
  std::vector<double> out(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) out[k] = values[k] * scales[i] + means[i];
  return out;
}

TimeSeriesFrame Normalizer::apply(const TimeSeriesFrame& frame) const {
  std::vector<Channel> out;
  out.reserve(frame.channel_count());
  for (const auto& ch : frame.channels()) {
    if (std::find(channels.begin(), channels.end(), ch.name) != channels.end()) {
      out.push_back(Channel{ch.name, normalize(ch.name, ch.values)});
    } else {
      out.push_back(ch);
    }
  }
  return TimeSeriesFrame(frame.start_time_s(), frame.sample_interval_s(), std::move(out), frame.time_axis());
}

Normalizer fit_normalizer(const TimeSeriesFrame& frame, const std::vector<std::string>& channels) {
  Normalizer norm;
  for (const auto& name : channels) {
    if (!frame.has_channel(name)) {
      throw Error(ErrorCode::UnknownChannel, "no channel named '" + name + "'");
    }
    const auto v = frame.channel(name);
    if (v.size() < 2) throw Error(ErrorCode::ZeroVariance, "channel '" + name + "' has fewer than 2 samples");
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double scale = std::sqrt(ss / static_cast<double>(v.size() - 1));
    if (!(scale > 0.0)) throw Error(ErrorCode::ZeroVariance, "channel '" + name + "' is constant");
    norm.channels.push_back(name);
    norm.means.push_back(mean);
    norm.scales.push_back(scale);
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Butterworth low-pass

Biquad butterworth_lowpass(double sample_interval_s, double cutoff_hz) {
  const double nyquist = 0.5 / sample_interval_s;
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < nyquist)) {
    throw Error(ErrorCode::CutoffAboveNyquist, "cutoff " + format_double(cutoff_hz) +
                                                   " Hz not in (0, " + format_double(nyquist) + ") Hz");
  }
  const double k = std::tan(std::numbers::pi * cutoff_hz * sample_interval_s);
  const double k2 = k * k;
  const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k2);
  Biquad f;
  f.b0 = k2 * norm;
  f.b1 = 2.0 * f.b0;
  f.b2 = f.b0;
  f.a1 = 2.0 * (k2 - 1.0) * norm;
  f.a2 = (1.0 - std::numbers::sqrt2 * k + k2) * norm;
  return f;
}

namespace {

// Direct form II transposed, state initialised to the steady state for a
// constant input equal to x[0].
void biquad_run(const Biquad& f, std::vector<double>& x) {
  if (x.empty()) return;
  double z1 = (f.b1 + f.b2 - f.a1 - f.a2) * x.front();
  double z2 = (f.b2 - f.a2) * x.front();
  for (double& v : x) {
    const double in = v;
    const double out = f.b0 * in + z1;
    z1 = f.b1 * in - f.a1 * out + z2;
    z2 = f.b2 * in - f.a2 * out;
    v = out;
  }
}

}  // namespace

std::vector<double> lowpass_filter(std::span<const double> signal, double sample_interval_s,
                                   double cutoff_hz) {
  const Biquad f = butterworth_lowpass(sample_interval_s, cutoff_hz);
  const std::size_t n = signal.size();
  if (n == 0) return {};

  // One cutoff period of odd-reflected padding on each side.
  const auto period = static_cast<std::size_t>(std::ceil(1.0 / (cutoff_hz * sample_interval_s)));
  const std::size_t pad = std::min(n - 1, std::max<std::size_t>(period, 9));

  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) ext[i] = 2.0 * signal[0] - signal[pad - i];
  std::copy(signal.begin(), signal.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));
  for (std::size_t i = 0; i < pad; ++i) ext[pad + n + i] = 2.0 * signal[n - 1] - signal[n - 2 - i];

  biquad_run(f, ext);
  std::reverse(ext.begin(), ext.end());
  biquad_run(f, ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

// ---------------------------------------------------------------------------
// Savitzky-Golay

void SavGolSpec::validate() const {
  if (window < 3 || window % 2 == 0) {
    throw Error(ErrorCode::InvalidSpec, "window must be odd and >= 3, got " + std::to_string(window));
  }
  if (poly_order < 0 || poly_order >= window) {
    throw Error(ErrorCode::InvalidSpec, "poly_order must be in [0, window), got " + std::to_string(poly_order));
  }
}

std::vector<double> savgol_weights_at(const SavGolSpec& spec, int position) {
  spec.validate();
  if (position < 0 || position >= spec.window) {
    throw Error(ErrorCode::InvalidSpec, "position outside window");
  }
  const int half = spec.window / 2;
  const int terms = spec.poly_order + 1;
  // Abscissae scaled to [-1, 1] keep the Vandermonde matrix well conditioned.
  Eigen::MatrixXd vander(spec.window, terms);
  for (int r = 0; r < spec.window; ++r) {
    const double x = static_cast<double>(r - half) / half;
    double p = 1.0;
    for (int c = 0; c < terms; ++c, p *= x) vander(r, c) = p;
  }
  Eigen::VectorXd at(terms);
  {
    const double x = static_cast<double>(position - half) / half;
    double p = 1.0;
    for (int c = 0; c < terms; ++c, p *= x) at(c) = p;
  }
  // weights^T = at^T (V^T V)^{-1} V^T = at^T R^{-1} Q^T
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(vander);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(terms).triangularView<Eigen::Upper>();
  const Eigen::VectorXd z = r.transpose().triangularView<Eigen::Lower>().solve(at);
  Eigen::VectorXd padded = Eigen::VectorXd::Zero(spec.window);
  padded.head(terms) = z;
  const Eigen::VectorXd w = qr.householderQ() * padded;
  return {w.data(), w.data() + w.size()};
}

std::vector<double> savgol_coefficients(const SavGolSpec& spec) {
  spec.validate();
  return savgol_weights_at(spec, spec.window / 2);
}

namespace {

void savgol_edges(std::span<const double> x, const SavGolSpec& spec, std::vector<double>& out) {
  const std::size_t w = static_cast<std::size_t>(spec.window);
  const std::size_t half = w / 2;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < half; ++i) {
    const auto head = savgol_weights_at(spec, static_cast<int>(i));
    const auto tail = savgol_weights_at(spec, static_cast<int>(w - half + i));
    double lo = 0.0, hi = 0.0;
    for (std::size_t k = 0; k < w; ++k) {
      lo += head[k] * x[k];
      hi += tail[k] * x[n - w + k];
    }
    out[i] = lo;
    out[n - half + i] = hi;
  }
}

void check_length(std::span<const double> x, const SavGolSpec& spec) {
  spec.validate();
  if (x.size() < static_cast<std::size_t>(spec.window)) {
    throw Error(ErrorCode::SignalTooShort, "signal of length " + std::to_string(x.size()) +
                                               " shorter than window " + std::to_string(spec.window));
  }
}

}  // namespace

std::vector<double> savgol_filter(std::span<const double> x, const SavGolSpec& spec) {
  check_length(x, spec);
  const auto c = savgol_coefficients(spec);
  const std::ptrdiff_t w = spec.window;
  const std::ptrdiff_t half = w / 2;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> out(x.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = half; i < n - half; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t k = 0; k < w; ++k) acc += c[k] * x[i - half + k];
    out[i] = acc;
  }
  savgol_edges(x, spec, out);
  return out;
}

namespace serial {

std::vector<double> savgol_filter(std::span<const double> x, const SavGolSpec& spec) {
  check_length(x, spec);
  const auto c = savgol_coefficients(spec);
  const std::size_t w = static_cast<std::size_t>(spec.window);
  const std::size_t half = w / 2;
  std::vector<double> out(x.size());
  for (std::size_t i = half; i + half < x.size(); ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < w; ++k) acc += c[k] * x[i - half + k];
    out[i] = acc;
  }
  savgol_edges(x, spec, out);
  return out;
}

}  // namespace serial

// ---------------------------------------------------------------------------
// PCA

Eigen::MatrixXd frame_rows(const TimeSeriesFrame& frame, const std::vector<std::string>& channels) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(frame.length()), static_cast<Eigen::Index>(channels.size()));
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const auto v = frame.channel(channels[c]);
    rows.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return rows;
}

PcaModel pca_fit(const TimeSeriesFrame& frame, const std::vector<std::string>& channels, int k) {
  const auto dim = static_cast<Eigen::Index>(channels.size());
  if (k < 1 || k > dim) {
    throw Error(ErrorCode::InvalidSpec, "component count " + std::to_string(k) + " not in [1, " +
                                            std::to_string(dim) + "]");
  }
  if (frame.length() < channels.size() + 1) {
    throw Error(ErrorCode::TooShort, "PCA needs at least " + std::to_string(channels.size() + 1) + " samples");
  }
  for (const auto& c : channels) {
    if (!frame.has_channel(c)) throw Error(ErrorCode::UnknownChannel, "no channel named '" + c + "'");
  }
  const Eigen::MatrixXd rows = frame_rows(frame, channels);
  PcaModel model;
  model.channels = channels;
  model.means = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - model.means.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(rows.rows() - 1);

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  // Eigen returns ascending order.
  const Eigen::VectorXd values = eig.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();

  const double top = values(0);
  const double tol = 1e-12 * std::max(top, 0.0);
  const auto positive = (values.array() > tol).count();
  if (!(top > 0.0) || positive < k) {
    throw Error(ErrorCode::RankDeficient, "covariance has " + std::to_string(positive) +
                                              " positive eigenvalues, need " + std::to_string(k));
  }

  model.eigenvalues = values;
  const Eigen::VectorXd clipped = values.cwiseMax(0.0);
  model.explained_variance_ratio = clipped / clipped.sum();
  model.loadings = vectors.leftCols(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index arg = 0;
    model.loadings.col(c).cwiseAbs().maxCoeff(&arg);
    if (model.loadings(arg, c) < 0.0) model.loadings.col(c) *= -1.0;
  }
  return model;
}

Eigen::MatrixXd pca_project(const PcaModel& model, const Eigen::MatrixXd& rows) {
  if (rows.cols() != model.means.size()) {
    throw Error(ErrorCode::DimensionMismatch, "rows have " + std::to_string(rows.cols()) +
                                                  " columns, model expects " + std::to_string(model.means.size()));
  }
  return (rows.rowwise() - model.means.transpose()) * model.loadings;
}

Eigen::MatrixXd pca_reconstruct(const PcaModel& model, const Eigen::MatrixXd& scores) {
  if (scores.cols() != model.loadings.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "score column count does not match component count");
  }
  return (scores * model.loadings.transpose()).rowwise() + model.means.transpose();
}

// ---------------------------------------------------------------------------
// Full chain

SbmPreprocessor fit_sbm_preprocessor(const TimeSeriesFrame& train, const ChannelRoleMap& roles,
                                     const SavGolSpec& savgol, double cutoff_hz) {
  roles.validate(train);
  savgol.validate();
  std::vector<std::string> used = roles.correlated_setpoints;
  used.push_back(roles.independent_setpoint);
  used.push_back(roles.disturbance);
  used.push_back(roles.output);

  SbmPreprocessor pre;
  pre.roles = roles;
  pre.savgol = savgol;
  pre.cutoff_hz = cutoff_hz;
  pre.normalizer = fit_normalizer(train, used);
  pre.pca = pca_fit(pre.normalizer.apply(train), roles.correlated_setpoints, 2);
  return pre;
}

TimeSeriesFrame build_sbm_dataset(const TimeSeriesFrame& frame, const ChannelRoleMap& roles,
                                  const PcaModel& pca, const Normalizer& norm, const SavGolSpec& sg,
                                  double cutoff_hz) {
  roles.validate(frame);
  sg.validate();
  if (pca.channels != roles.correlated_setpoints) {
    throw Error(ErrorCode::DimensionMismatch, "PCA channels do not match the correlated setpoint roles");
  }
  if (pca.components() < 2) {
    throw Error(ErrorCode::DimensionMismatch, "PCA model needs at least 2 components");
  }
  const double dt = frame.sample_interval_s();
  const auto n = static_cast<Eigen::Index>(frame.length());

  Eigen::MatrixXd setpoints(n, static_cast<Eigen::Index>(roles.correlated_setpoints.size()));
  for (std::size_t c = 0; c < roles.correlated_setpoints.size(); ++c) {
    const auto& name = roles.correlated_setpoints[c];
    const auto z = norm.normalize(name, frame.channel(name));
    setpoints.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(z.data(), n);
  }
  const Eigen::MatrixXd scores = pca_project(pca, setpoints);

  std::vector<std::vector<double>> raw_inputs(4);
  for (int c = 0; c < 2; ++c) raw_inputs[c].assign(scores.col(c).data(), scores.col(c).data() + n);
  raw_inputs[2] = norm.normalize(roles.independent_setpoint, frame.channel(roles.independent_setpoint));
  raw_inputs[3] = norm.normalize(roles.disturbance, frame.channel(roles.disturbance));
  const auto y = norm.normalize(roles.output, frame.channel(roles.output));

  std::vector<Channel> out(5);
  const auto& names = sbm_channel_names();
  // The low-pass throws on a bad cutoff; run it once up front so the
  // parallel loop below cannot throw.
  butterworth_lowpass(dt, cutoff_hz);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < 4; ++c) {
    out[c] = Channel{names[c], lowpass_filter(raw_inputs[c], dt, cutoff_hz)};
  }
  out[4] = Channel{names[4], savgol_filter(y, sg)};
  return TimeSeriesFrame(frame.start_time_s(), dt, std::move(out), frame.time_axis());
}

TimeSeriesFrame build_sbm_dataset(const TimeSeriesFrame& frame, const SbmPreprocessor& pre) {
  return build_sbm_dataset(frame, pre.roles, pre.pca, pre.normalizer, pre.savgol, pre.cutoff_hz);
}

}  // namespace sbm
