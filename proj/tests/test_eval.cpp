#include <cmath>
#include <fstream>
#include <sstream>

#include "sbm/eval.hpp"
#include "sbm/json_io.hpp"
#include "sbm/synthplant.hpp"
#include "test_util.hpp"

using namespace sbm;

namespace {

ArxDataset arx_data(std::size_t length, double noise, std::uint64_t seed) {
  ArxScenario sc;
  sc.truth = random_stable_model(3, 4, seed);
  sc.length = length;
  sc.noise_std = noise;
  sc.seed = seed;
  return generate_arx_dataset(sc);
}

HorizonSpec hours(double t_sched_h, double stride_h) { return {t_sched_h * 3600.0, stride_h * 3600.0}; }

// Window MSE computed from scratch: plain recursion on a and b.
double brute_window(const ArxModel& m, const ArxData& d, std::size_t start, std::size_t n_sched) {
  const auto n = static_cast<std::size_t>(m.order);
  std::vector<double> y(d.output.begin() + static_cast<std::ptrdiff_t>(start - n),
                        d.output.begin() + static_cast<std::ptrdiff_t>(start));
  double sse = 0.0;
  for (std::size_t k = 0; k < n_sched; ++k) {
    const std::size_t t = start + k;
    double v = 0.0;
    for (std::size_t j = 1; j <= n; ++j) {
      v -= m.a(static_cast<Eigen::Index>(j - 1)) * y[y.size() - j];
      for (std::size_t i = 0; i < d.inputs.size(); ++i)
        v += m.b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1)) * d.inputs[i][t - j];
    }
    y.push_back(v);
    sse += (d.output[t] - v) * (d.output[t] - v);
  }
  return sse / static_cast<double>(n_sched);
}

FilterTuning small_tuning(Eigen::Index d, double q, double p0) {
  FilterTuning t;
  t.Q = Eigen::MatrixXd::Identity(d, d) * q;
  t.P0 = Eigen::MatrixXd::Identity(d, d) * p0;
  t.R = 1.0;
  t.beta = 1e6;
  return t;
}

PlantConfig short_plant(std::uint64_t seed, double days) {
  PlantConfig cfg;
  cfg.seed = seed;
  cfg.duration_days = days;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("moving_horizon_mse") {
  const std::vector<double> y{0, 1, 2}, zero{0, 0, 0};
  CHECK(moving_horizon_mse(y, y) == 0.0);
  CHECK(moving_horizon_mse(y, zero) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  const std::vector<double> shifted{1, 2, 3};
  CHECK(moving_horizon_mse(y, shifted) == 1.0);
  CHECK_SBM_ERROR(moving_horizon_mse(y, std::vector<double>{0, 0}), ErrorCode::LengthMismatch);
}

TEST_CASE("median") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK(std::isnan(median({})));
}

TEST_CASE("fourteen days give 241 hourly windows") {
  const auto ds = arx_data(14 * 1440 + 3, 0.0, 1);
  const auto s = evaluate_moving_horizon(ds.truth.base, ds.frame, HorizonSpec{});
  REQUIRE(s.mse.size() == 241);
  CHECK(s.t_hours.front() == 0.0);
  CHECK(s.t_hours.back() == 240.0);
  CHECK(s.start_sample.front() == 3);
  // The model reproduces noise-free data.
  for (double v : s.mse) CHECK(v < 1e-20);

  CHECK(evaluation_count(14 * 1440 + 3, 3, 5760, 60) == 241);
  CHECK(evaluation_count(100, 3, 98, 1) == 0);
  CHECK_SBM_ERROR(evaluate_moving_horizon(ds.truth.base, slice_window(ds.frame, 0, 4 * 1440), HorizonSpec{}),
                  ErrorCode::InsufficientData);
  CHECK_SBM_ERROR(HorizonSpec({90.0, 3600.0}).n_sched(60.0), ErrorCode::InvalidSpec);
}

TEST_CASE("evaluation equals brute-force recomputation") {
  const auto ds = arx_data(3000, 0.5, 2);
  const auto model = fit_least_squares(build_regression(ds.frame, 3));
  const auto view = arx_view(ds.frame);
  const auto spec = hours(8.0, 1.0);
  const auto s = evaluate_moving_horizon(model, ds.frame, spec);
  const std::size_t n_sched = 480;
  for (std::size_t k = 0; k < s.mse.size(); ++k) {
    const std::size_t start = s.start_sample[k];
    // Exact: the public free-run from scratch plus a hand-written MSE.
    std::vector<std::span<const double>> u;
    for (const auto& in : view.inputs) u.push_back(in.subspan(start - 3));
    const auto pred = simulate_free_run(model, view.output.subspan(start - 3, 3), u, n_sched);
    double sse = 0.0;
    for (std::size_t i = 0; i < n_sched; ++i) sse += (view.output[start + i] - pred[i]) * (view.output[start + i] - pred[i]);
    CHECK(s.mse[k] == sse / static_cast<double>(n_sched));
    // Independent recursion, different summation order.
    CHECK(s.mse[k] == doctest::Approx(brute_window(model, view, start, n_sched)).epsilon(1e-10));
  }
}

TEST_CASE("causality: truncating data leaves earlier windows unchanged") {
  const auto ds = arx_data(4000, 0.3, 3);
  const auto model = fit_least_squares(build_regression(slice_window(ds.frame, 0, 1500), 3));
  const auto spec = hours(12.0, 2.0);
  const auto full = evaluate_moving_horizon(model, ds.frame, spec);
  ParameterFilter filter(model.theta(), small_tuning(model.parameter_count(), 1e-6, 1e-3));
  const auto full_ad = evaluate_moving_horizon(filter, 3, ds.frame, spec);
  for (std::size_t k = 0; k < full.mse.size(); k += 3) {
    const std::size_t end = full.start_sample[k] + 720;
    const auto cut = slice_window(ds.frame, 0, end);
    const auto part = evaluate_moving_horizon(model, cut, spec);
    const auto part_ad = evaluate_moving_horizon(filter, 3, cut, spec);
    REQUIRE(part.mse.size() == k + 1);
    for (std::size_t i = 0; i <= k; ++i) {
      CHECK(part.mse[i] == full.mse[i]);
      CHECK(part_ad.mse[i] == full_ad.mse[i]);
    }
  }
}

TEST_CASE("an inert filter reproduces the static series") {
  const auto ds = arx_data(4000, 0.3, 4);
  const auto model = fit_least_squares(build_regression(slice_window(ds.frame, 0, 1500), 3));
  const auto spec = hours(6.0, 1.0);
  ParameterFilter inert(model.theta(), small_tuning(model.parameter_count(), 0.0, 0.0));
  const auto st = evaluate_moving_horizon(model, ds.frame, spec);
  const auto ad = evaluate_moving_horizon(inert, 3, ds.frame, spec);
  REQUIRE(st.mse.size() == ad.mse.size());
  CHECK(st.t_hours == ad.t_hours);
  for (std::size_t k = 0; k < st.mse.size(); ++k) CHECK(std::abs(st.mse[k] - ad.mse[k]) <= 1e-9);
}

TEST_CASE("adaptive snapshots never see the window") {
  const auto ds = arx_data(2000, 0.3, 5);
  const auto view = arx_view(ds.frame);
  ParameterFilter f(Eigen::VectorXd::Zero(15), small_tuning(15, 1e-5, 1.0));
  const auto snaps = adaptive_snapshots(f, 3, view, 3, 100, 5);
  REQUIRE(snaps.size() == 5);
  CHECK(snaps[0] == Eigen::VectorXd::Zero(15));
  // Snapshot k equals a filter stepped over samples 3 .. 3 + 100k - 1.
  ParameterFilter g = f;
  run_stream(g, slice_window(ds.frame, 0, 3 + 400), 3);
  CHECK(snaps[4] == g.theta());
}

TEST_CASE("cross-dataset covariance") {
  const auto base = random_stable_model(3, 4, 6);
  std::vector<ArxModel> same(12, base);
  const auto s0 = cross_dataset_covariance(same);
  CHECK(s0.sigma.isZero(0.0));
  for (Eigen::Index i = 0; i < s0.scaled.size(); ++i) CHECK(s0.scaled.data()[i] == doctest::Approx(1.0).epsilon(1e-15));

  const double m = base.b(0, 0), d = 0.125;
  ArxModel lo = base, hi = base;
  lo.b(0, 0) = m - d;
  hi.b(0, 0) = m + d;
  const auto s2 = cross_dataset_covariance({lo, hi});
  for (Eigen::Index i = 0; i < 15; ++i) {
    for (Eigen::Index j = 0; j < 15; ++j) {
      const double expect = i == 3 && j == 3 ? (d * d + d * d) / (2 - 1) : 0.0;
      CHECK(s2.sigma(i, j) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
  CHECK(s2.scaled(0, 3) == doctest::Approx((m - d) / m));
  CHECK(s2.scaled(1, 3) == doctest::Approx((m + d) / m));
  CHECK(s2.mean(3) == doctest::Approx(m));

  CHECK_SBM_ERROR(cross_dataset_covariance({base}), ErrorCode::TooFewModels);
  CHECK_SBM_ERROR(cross_dataset_covariance({base, random_stable_model(2, 4, 1)}), ErrorCode::DimensionMismatch);
}

TEST_CASE("phase summaries") {
  MseSeries s;
  for (int h = 0; h <= 240; ++h) {
    s.t_hours.push_back(h);
    s.start_sample.push_back(static_cast<std::size_t>(h) * 60);
    s.mse.push_back(h < 72 ? 1.0 : (h < 168 ? 2.0 + h : 1000.0 + h));
  }
  const auto p = phase_summaries(s, 7.0, 4.0);
  REQUIRE(p.size() == 3);
  CHECK(p[0].name == "train");
  CHECK(p[0].count == 73);   // hours 0..72
  CHECK(p[1].count == 95);   // hours 73..167
  CHECK(p[2].count == 73);   // hours 168..240
  CHECK(p[0].end_days == 3.0);
  CHECK(p[2].begin_days == 7.0);
  CHECK(p[0].median == 1.0);
  CHECK(p[2].median == 1204.0);
  CHECK(p[1].mean == doctest::Approx(2.0 + 120.0));
}

TEST_CASE("run_experiment") {
  const auto data = generate_dataset(short_plant(40, 10.0)).frame;
  const std::vector<TimeSeriesFrame> siblings{generate_dataset(short_plant(41, 5.0)).frame,
                                              generate_dataset(short_plant(42, 5.0)).frame};
  ExperimentSettings cfg;
  cfg.d_train_days = 5.0;
  cfg.horizon = HorizonSpec{2.0 * 86400.0, 3600.0};

  SUBCASE("phases and summaries") {
    const auto r = run_experiment(data, siblings, cfg);
    CHECK(r.phase_boundaries_days == std::vector<double>{3.0, 5.0});
    REQUIRE(r.adaptive_series.has_value());
    CHECK(r.adaptive_series->t_hours == r.static_series.t_hours);
    // The last full window would need N samples past day 10.
    CHECK(r.static_series.mse.size() == (10 - 2) * 24);
    CHECK(r.sibling_count == 2);
    CHECK(r.n_train == 5 * 1440);
    REQUIRE(r.filter_r.has_value());
    CHECK(*r.filter_r == 1.0);
    // Summaries are recomputable from the stored series.
    const auto again = phase_summaries(r.static_series, 5.0, 2.0);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(again[i].count == r.static_summary[i].count);
      CHECK(again[i].median == r.static_summary[i].median);
      CHECK(again[i].mean == r.static_summary[i].mean);
      CHECK(again[i].std == r.static_summary[i].std);
    }
    CHECK(r.trajectory.size() == (data.length() - 3) / 60);
  }
  SUBCASE("static only") {
    cfg.adaptive = false;
    const auto r = run_experiment(data, {}, cfg);
    CHECK_FALSE(r.adaptive_series.has_value());
    CHECK(r.adaptive_summary.empty());
    CHECK(r.trajectory.empty());
    const auto dir = testutil::scratch_dir("static_only");
    write_report(r, dir);
    CHECK(std::filesystem::exists(dir / "report.json"));
    CHECK(std::filesystem::exists(dir / "mse_static.csv"));
    CHECK_FALSE(std::filesystem::exists(dir / "mse_adaptive.csv"));
    CHECK(read_json_file(dir / "report.json")["adaptive"].is_null());
  }
  SUBCASE("byte-identical reports") {
    const auto a = testutil::scratch_dir("report_a"), b = testutil::scratch_dir("report_b");
    write_report(run_experiment(data, siblings, cfg), a);
    write_report(run_experiment(data, siblings, cfg), b);
    for (const char* f : {"report.json", "mse_static.csv", "mse_adaptive.csv", "trajectory.csv"}) {
      CHECK(slurp(a / f) == slurp(b / f));
      CHECK_FALSE(slurp(a / f).empty());
    }
  }
  SUBCASE("tuning overrides") {
    cfg.tuning.r = 0.25;
    CHECK(*run_experiment(data, siblings, cfg).filter_r == 0.25);
    cfg.tuning.r.reset();
    cfg.tuning.r_from_fit = true;
    const auto r = run_experiment(data, siblings, cfg);
    CHECK(*r.filter_r == r.model.residual_variance);
  }
  SUBCASE("explicit sigma") {
    cfg.sigma = Eigen::MatrixXd::Identity(15, 15) * 1e-4;
    const auto r = run_experiment(data, {}, cfg);
    CHECK(r.sibling_count == 0);
    CHECK(*r.sigma == *cfg.sigma);
  }
  SUBCASE("configuration errors name the key") {
    auto expect_key = [&](const ExperimentSettings& s, const std::string& key) {
      try {
        run_experiment(data, siblings, s);
        FAIL("expected InvalidConfig");
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidConfig);
        CHECK(std::string(e.what()).find(key) != std::string::npos);
      }
    };
    ExperimentSettings s = cfg;
    s.d_train_days = 0.0;
    expect_key(s, "d_train_days");
    s = cfg;
    s.order = 0;
    expect_key(s, "order");
    s = cfg;
    s.tuning.r = -1.0;
    expect_key(s, "tuning.r");
    s = cfg;
    s.savgol.window = 4;
    expect_key(s, "savgol");
    s = cfg;
    s.record_every = 0;
    expect_key(s, "record_every");
    try {
      run_experiment(data, {}, cfg);
      FAIL("expected InvalidConfig");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidConfig);
      CHECK(std::string(e.what()).find("siblings") != std::string::npos);
    }
  }
}
