#include "sbm/synthplant.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <numbers>

#include "sbm/error.hpp"
#include "sbm/json_io.hpp"
#include "sbm/random.hpp"

namespace sbm {

namespace {

// Coefficients of prod (z - p_k) without the leading 1.
Eigen::VectorXd monic_from_roots(const std::vector<std::complex<double>>& roots) {
  std::vector<std::complex<double>> poly{1.0};
  for (const auto& r : roots) {
    std::vector<std::complex<double>> next(poly.size() + 1, 0.0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i] += poly[i];
      next[i + 1] -= r * poly[i];
    }
    poly = std::move(next);
  }
  Eigen::VectorXd a(static_cast<Eigen::Index>(roots.size()));
  for (std::size_t i = 1; i < poly.size(); ++i) a(static_cast<Eigen::Index>(i - 1)) = poly[i].real();
  return a;
}

// Ornstein-Uhlenbeck process seen through two first-order lags: slow, smooth,
// bounded. Starts from a draw of its stationary distribution.
class SlowProcess {
 public:
  SlowProcess(double step_std, double reversion_samples, double lag_samples, Rng& rng)
      : rho_(reversion_samples > 1.0 ? 1.0 - 1.0 / reversion_samples : 0.0),
        step_std_(step_std),
        lag_gain_(lag_samples > 1.0 ? 1.0 / lag_samples : 1.0) {
    const double stationary = step_std / std::sqrt(std::max(1.0 - rho_ * rho_, 1e-12));
    ou_ = stationary * rng.normal();
    mid_ = ou_;
    value_ = ou_;
  }

  double value() const { return value_; }

  double advance(Rng& rng) {
    ou_ = rho_ * ou_ + step_std_ * rng.normal();
    mid_ += (ou_ - mid_) * lag_gain_;
    value_ += (mid_ - value_) * lag_gain_;
    return value_;
  }

 private:
  double rho_;
  double step_std_;
  double lag_gain_;
  double ou_ = 0.0;
  double mid_ = 0.0;
  double value_ = 0.0;
};

constexpr double kMixing[6][2] = {
    {1.00, 0.25}, {0.85, -0.40}, {0.70, 0.65}, {-0.60, 0.80}, {0.95, 0.10}, {0.40, -0.90},
};
constexpr double kSetpointOffsets[6] = {100.0, 80.0, 45.0, 60.0, 120.0, 30.0};

std::vector<std::vector<double>> random_walk_paths(const std::vector<CoefficientDrift>& drift, std::size_t n,
                                                   std::uint64_t seed) {
  std::vector<std::vector<double>> paths(drift.size());
  for (std::size_t d = 0; d < drift.size(); ++d) {
    if (drift[d].kind != DriftKind::RandomWalk) continue;
    Rng rng(derive_seed(seed, 500 + d));
    const double sd = std::sqrt(drift[d].step_variance);
    auto& p = paths[d];
    p.resize(n);
    double acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      p[t] = acc;
      acc += sd * rng.normal();
    }
  }
  return paths;
}

void check_drift(const std::vector<CoefficientDrift>& drift, Eigen::Index params) {
  for (const auto& d : drift) {
    if (static_cast<Eigen::Index>(d.index) >= params) {
      throw Error(ErrorCode::InvalidConfig, "'drift': coefficient index " + std::to_string(d.index) + " out of range");
    }
    if (d.step_variance < 0.0 || !std::isfinite(d.rate_per_day) || !std::isfinite(d.amount) || d.start_day < 0.0) {
      throw Error(ErrorCode::InvalidConfig, "'drift': bad rate, amount, variance or start day");
    }
  }
}

}  // namespace

std::vector<CoefficientDrift> relative_input_ramp(const ArxModel& truth, int input, double relative_rate,
                                                  double start_day) {
  if (input < 0 || input >= truth.inputs) throw Error(ErrorCode::InvalidConfig, "'drift': no input " + std::to_string(input + 1));
  std::vector<CoefficientDrift> out;
  for (int j = 0; j < truth.order; ++j) {
    CoefficientDrift d;
    d.index = static_cast<std::size_t>(truth.order + input * truth.order + j);
    d.kind = DriftKind::Ramp;
    d.rate_per_day = relative_rate * truth.b(input, j);
    d.start_day = start_day;
    out.push_back(d);
  }
  return out;
}

std::vector<CoefficientDrift> relative_input_step(const ArxModel& truth, int input, double relative_change,
                                                  double start_day) {
  if (input < 0 || input >= truth.inputs) throw Error(ErrorCode::InvalidConfig, "'drift': no input " + std::to_string(input + 1));
  std::vector<CoefficientDrift> out;
  for (int j = 0; j < truth.order; ++j) {
    CoefficientDrift d;
    d.index = static_cast<std::size_t>(truth.order + input * truth.order + j);
    d.kind = DriftKind::Step;
    d.amount = relative_change * truth.b(input, j);
    d.start_day = start_day;
    out.push_back(d);
  }
  return out;
}

ArxModel default_plant_truth() {
  ArxModel m = ArxModel::zeros(3, 4);
  m.a = monic_from_roots({0.7, 0.5, 0.3});
  const double dc = 1.0 + m.a.sum();
  const double gains[4] = {1.0, 0.6, 0.5, -0.4};
  const double lag_weights[3] = {0.5, 0.3, 0.2};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) m.b(i, j) = gains[i] * dc * lag_weights[j];
  }
  m.input_names = {"u1", "u2", "u3", "u4"};
  return m;
}

Eigen::VectorXd GroundTruth::theta_at(std::size_t sample) const {
  Eigen::VectorXd theta = base.theta();
  const double day = static_cast<double>(sample) * sample_interval_s / 86400.0;
  for (std::size_t d = 0; d < drift.size(); ++d) {
    const auto& dr = drift[d];
    const auto idx = static_cast<Eigen::Index>(dr.index);
    if (dr.kind == DriftKind::Ramp) {
      theta(idx) += dr.rate_per_day * std::max(0.0, day - dr.start_day);
    } else if (dr.kind == DriftKind::Step) {
      if (day >= dr.start_day) theta(idx) += dr.amount;
    } else if (dr.kind == DriftKind::RandomWalk && sample < random_walk_paths[d].size()) {
      theta(idx) += random_walk_paths[d][sample];
    }
  }
  return theta;
}

void PlantConfig::validate() const {
  auto bad = [](const std::string& key, const std::string& why) {
    throw Error(ErrorCode::InvalidConfig, "'" + key + "': " + why);
  };
  if (!(duration_days > 0.0)) bad("days", "must be positive");
  if (!(sample_interval_s > 0.0)) bad("interval", "must be positive");
  if (latent_factor_count < 1 || latent_factor_count > 2) bad("latent_factors", "must be 1 or 2");
  if (setpoint_noise < 0.0 || latent_step_std < 0.0 || temperature_drift_std < 0.0 || output_noise_std < 0.0) {
    bad("noise", "noise levels must be >= 0");
  }
  if (!(latent_reversion_days > 0.0)) bad("latent_reversion_days", "must be positive");
  if (smoothing_minutes < 0.0) bad("smoothing_minutes", "must be >= 0");
  if (truth.inputs != 4) bad("truth", "plant model needs 4 inputs");
  const auto samples = std::llround(duration_days * 86400.0 / sample_interval_s);
  if (samples < truth.order + 1) bad("days", "shorter than the model order");
  check_drift(drift, truth.parameter_count());
}

PlantDataset generate_dataset(const PlantConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(std::llround(cfg.duration_days * 86400.0 / cfg.sample_interval_s));
  const double dt = cfg.sample_interval_s;
  const double reversion = cfg.latent_reversion_days * 86400.0 / dt;
  const double lag = cfg.smoothing_minutes * 60.0 / dt;

  Rng latent_rng(derive_seed(cfg.seed, 1));
  Rng setpoint_rng(derive_seed(cfg.seed, 2));
  Rng temp_rng(derive_seed(cfg.seed, 3));
  Rng noise_rng(derive_seed(cfg.seed, 4));

  std::vector<SlowProcess> latents;
  for (int k = 0; k < cfg.latent_factor_count; ++k) latents.emplace_back(cfg.latent_step_std, reversion, lag, latent_rng);
  SlowProcess sp_ind(cfg.latent_step_std, reversion, lag, latent_rng);
  SlowProcess sp_exc(cfg.latent_step_std, reversion, lag, latent_rng);
  SlowProcess t_drift(cfg.temperature_drift_std, reversion, lag, temp_rng);

  std::vector<std::vector<double>> sp(6, std::vector<double>(n));
  std::vector<double> ind(n), exc(n), temp(n), power(n), noise(n);
  std::vector<std::vector<double>> u(4, std::vector<double>(n));

  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) {
      for (auto& l : latents) l.advance(latent_rng);
      sp_ind.advance(latent_rng);
      sp_exc.advance(latent_rng);
      t_drift.advance(temp_rng);
    }
    const double f1 = latents[0].value();
    const double f2 = latents.size() > 1 ? latents[1].value() : 0.0;
    for (int c = 0; c < 6; ++c) {
      const double noise_c = cfg.setpoint_noise > 0.0 ? cfg.setpoint_noise * setpoint_rng.normal() : 0.0;
      sp[c][t] = kSetpointOffsets[c] + kMixing[c][0] * f1 + kMixing[c][1] * f2 + noise_c;
    }
    ind[t] = 50.0 + sp_ind.value();
    exc[t] = 30.0 + sp_exc.value();
    const double seconds = static_cast<double>(t) * dt;
    const double t_dev = cfg.temperature_amplitude * std::sin(2.0 * std::numbers::pi * seconds / 86400.0) + t_drift.value();
    temp[t] = 15.0 + t_dev;
    u[0][t] = f1;
    u[1][t] = f2;
    u[2][t] = sp_ind.value();
    u[3][t] = t_dev;
    noise[t] = cfg.output_noise_std > 0.0 ? cfg.output_noise_std * noise_rng.normal() : 0.0;
  }

  GroundTruth truth;
  truth.base = cfg.truth;
  truth.drift = cfg.drift;
  truth.random_walk_paths = random_walk_paths(cfg.drift, n, cfg.seed);
  truth.sample_interval_s = dt;
  truth.nonlinearity_gain = cfg.nonlinearity_gain;

  const int order = cfg.truth.order;
  const auto effective = [&](int i, std::size_t t) {
    const double v = u[static_cast<std::size_t>(i)][t];
    return i == 0 ? v + cfg.nonlinearity_gain * v * v : v;
  };
  // Start at the equilibrium for the initial inputs; inputs before t = 0 hold
  // their initial values.
  const Eigen::VectorXd theta0 = truth.theta_at(0);
  double y_eq = 0.0;
  {
    double gain_sum = 0.0;
    for (int i = 0; i < 4; ++i) {
      double bsum = 0.0;
      for (int j = 0; j < order; ++j) bsum += theta0(order + i * order + j);
      gain_sum += bsum * effective(i, 0);
    }
    y_eq = gain_sum / (1.0 - theta0.head(order).sum());
  }
  std::vector<double> y(n);
  for (std::size_t t = 0; t < n; ++t) {
    const Eigen::VectorXd theta = truth.drift.empty() ? theta0 : truth.theta_at(t);
    double acc = noise[t];
    for (int j = 1; j <= order; ++j) {
      const double y_lag = t >= static_cast<std::size_t>(j) ? y[t - j] : y_eq;
      acc += theta(j - 1) * y_lag;
      for (int i = 0; i < 4; ++i) {
        const std::size_t s = t >= static_cast<std::size_t>(j) ? t - j : 0;
        acc += theta(order + i * order + j - 1) * effective(i, s);
      }
    }
    y[t] = acc;
    power[t] = 20.0 + acc;
  }

  std::vector<Channel> channels;
  for (int c = 0; c < 6; ++c) channels.push_back({"sp_c" + std::to_string(c + 1), std::move(sp[c])});
  channels.push_back({"sp_ind", std::move(ind)});
  channels.push_back({"sp_exc", std::move(exc)});
  channels.push_back({"T", std::move(temp)});
  channels.push_back({"W_fac", std::move(power)});

  std::vector<Channel> derived;
  for (int i = 0; i < 4; ++i) derived.push_back({"u" + std::to_string(i + 1), std::move(u[i])});
  derived.push_back({"y", std::move(y)});

  return PlantDataset{TimeSeriesFrame(0.0, dt, std::move(channels)), TimeSeriesFrame(0.0, dt, std::move(derived)),
                      std::move(noise), std::move(truth)};
}

std::vector<PlantDataset> monthly_suite(const PlantConfig& config, int months) {
  if (months < 1) throw Error(ErrorCode::InvalidConfig, "'months': must be >= 1");
  config.validate();
  std::vector<PlantConfig> configs(static_cast<std::size_t>(months), config);
  Rng regime(derive_seed(config.seed, 1000));
  for (int m = 0; m < months; ++m) {
    auto& c = configs[static_cast<std::size_t>(m)];
    c.seed = derive_seed(config.seed, 100 + static_cast<std::uint64_t>(m));
    for (int i = 0; i < 3; ++i) c.truth.b.row(i) *= regime.uniform(0.25, 1.75);
  }
  std::vector<std::optional<PlantDataset>> out(configs.size());
  std::vector<std::exception_ptr> failures(configs.size());
#pragma omp parallel for schedule(dynamic)
  for (int m = 0; m < months; ++m) {
    try {
      out[static_cast<std::size_t>(m)] = generate_dataset(configs[static_cast<std::size_t>(m)]);
    } catch (...) {
      failures[static_cast<std::size_t>(m)] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  std::vector<PlantDataset> suite;
  suite.reserve(out.size());
  for (auto& d : out) suite.push_back(std::move(*d));
  return suite;
}

void write_ground_truth(const GroundTruth& truth, std::size_t length, const std::filesystem::path& path) {
  json j;
  j["base_model"] = to_json(truth.base);
  j["nonlinearity_gain"] = truth.nonlinearity_gain;
  json drift = json::array();
  for (const auto& d : truth.drift) {
    const char* kind = d.kind == DriftKind::Ramp         ? "ramp"
                       : d.kind == DriftKind::RandomWalk ? "random_walk"
                       : d.kind == DriftKind::Step       ? "step"
                                                         : "none";
    drift.push_back({{"index", d.index}, {"kind", kind}, {"rate_per_day", d.rate_per_day},
                     {"step_variance", d.step_variance}, {"amount", d.amount}, {"start_day", d.start_day}});
  }
  j["drift"] = drift;
  const auto per_hour = static_cast<std::size_t>(std::llround(3600.0 / truth.sample_interval_s));
  json hours = json::array(), thetas = json::array();
  for (std::size_t s = 0; s < length; s += std::max<std::size_t>(per_hour, 1)) {
    hours.push_back(static_cast<double>(s) * truth.sample_interval_s / 3600.0);
    thetas.push_back(to_json(truth.theta_at(s)));
  }
  j["theta_hourly"] = {{"t_hours", hours}, {"theta", thetas}};
  write_json_file(j, path);
}

ArxDataset generate_arx_dataset(const ArxScenario& sc) {
  if (sc.length <= static_cast<std::size_t>(sc.truth.order)) {
    throw Error(ErrorCode::InvalidConfig, "'length': must exceed the model order");
  }
  if (sc.input_std < 0.0 || sc.noise_std < 0.0) throw Error(ErrorCode::InvalidConfig, "'noise': must be >= 0");
  check_drift(sc.drift, sc.truth.parameter_count());
  const auto n = sc.length;
  const int order = sc.truth.order;
  const int m = sc.truth.inputs;
  Rng input_rng(derive_seed(sc.seed, 11));
  Rng noise_rng(derive_seed(sc.seed, 12));

  std::vector<std::vector<double>> u(static_cast<std::size_t>(m), std::vector<double>(n));
  for (std::size_t t = 0; t < n; ++t) {
    for (auto& ch : u) ch[t] = sc.input_std * input_rng.normal();
  }
  GroundTruth truth;
  truth.base = sc.truth;
  truth.drift = sc.drift;
  truth.random_walk_paths = random_walk_paths(sc.drift, n, sc.seed);
  truth.sample_interval_s = sc.truth.sample_interval_s;

  const Eigen::VectorXd fixed = sc.truth.theta();
  std::vector<double> y(n);
  for (std::size_t t = 0; t < n; ++t) {
    const Eigen::VectorXd theta = sc.drift.empty() ? fixed : truth.theta_at(t);
    double acc = sc.noise_std > 0.0 ? sc.noise_std * noise_rng.normal() : 0.0;
    for (int j = 1; j <= order && static_cast<std::size_t>(j) <= t; ++j) {
      acc += theta(j - 1) * y[t - j];
      for (int i = 0; i < m; ++i) acc += theta(order + i * order + j - 1) * u[static_cast<std::size_t>(i)][t - j];
    }
    y[t] = acc;
  }
  std::vector<Channel> channels;
  for (int i = 0; i < m; ++i) channels.push_back({"u" + std::to_string(i + 1), std::move(u[static_cast<std::size_t>(i)])});
  channels.push_back({"y", std::move(y)});
  return ArxDataset{TimeSeriesFrame(0.0, sc.truth.sample_interval_s, std::move(channels)), std::move(truth)};
}

ArxModel random_stable_model(int order, int inputs, std::uint64_t seed, double max_pole) {
  Rng rng(derive_seed(seed, 21));
  std::vector<std::complex<double>> roots;
  while (static_cast<int>(roots.size()) + 1 < order) {
    const double r = rng.uniform(0.2, max_pole);
    const double angle = rng.uniform(0.1, std::numbers::pi - 0.1);
    roots.push_back(std::polar(r, angle));
    roots.push_back(std::polar(r, -angle));
  }
  if (static_cast<int>(roots.size()) < order) roots.emplace_back(rng.uniform(-max_pole, max_pole));
  ArxModel m = ArxModel::zeros(order, inputs);
  m.a = monic_from_roots(roots);
  for (int i = 0; i < inputs; ++i) {
    for (int j = 0; j < order; ++j) m.b(i, j) = rng.uniform(-1.0, 1.0);
  }
  return m;
}

namespace scenarios {

ArxScenario exact_recovery() {
  ArxScenario sc;
  sc.truth = random_stable_model(3, 4, 2020);
  sc.length = 7 * 1440;
  sc.noise_std = 0.0;
  sc.seed = 7;
  return sc;
}

ArxScenario noisy_order3(std::uint64_t seed) {
  ArxScenario sc;
  sc.truth = ArxModel::zeros(3, 4);
  sc.truth.a = monic_from_roots({0.8, 0.5, -0.4});
  sc.truth.b << 0.5, -0.3, 0.8,  //
      0.2, 0.6, -0.5,            //
      -0.4, 0.3, 0.6,            //
      0.3, -0.2, 0.4;
  sc.length = 7 * 1440;
  sc.noise_std = 0.5;
  sc.seed = seed;
  return sc;
}

PlantConfig drift_experiment() {
  PlantConfig c;
  c.seed = 2024;
  c.duration_days = 14.0;
  c.nonlinearity_gain = 0.05;
  c.drift = relative_input_step(c.truth, 0, -0.4, 7.0);
  return c;
}

PlantConfig drift_siblings() {
  PlantConfig c;
  c.seed = 4048;
  c.duration_days = 7.0;
  c.nonlinearity_gain = 0.05;
  return c;
}

PlantConfig stability_months() {
  PlantConfig c;
  c.seed = 1212;
  c.duration_days = 7.0;
  c.latent_step_std = 0.02;
  c.latent_reversion_days = 2.0;
  c.output_noise_std = 0.001;
  return c;
}

PlantConfig year() {
  PlantConfig c;
  c.seed = 365;
  c.duration_days = 365.0;
  c.nonlinearity_gain = 0.05;
  for (int j = 0; j < c.truth.order; ++j) {
    CoefficientDrift d;
    d.index = static_cast<std::size_t>(c.truth.order + j);
    d.kind = DriftKind::RandomWalk;
    d.step_variance = std::pow(1e-3 * c.truth.b(0, j), 2);
    c.drift.push_back(d);
  }
  return c;
}

}  // namespace scenarios

}  // namespace sbm
