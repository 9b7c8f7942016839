#include <omp.h>

#include <random>

#include "sbm/eval.hpp"
#include "sbm/synthplant.hpp"
#include "test_util.hpp"

using namespace sbm;

namespace {

ArxDataset data(std::size_t length) {
  ArxScenario sc = scenarios::noisy_order3(9);
  sc.length = length;
  return generate_arx_dataset(sc);
}

void check_same(const MseSeries& a, const MseSeries& b) {
  CHECK(a.t_hours == b.t_hours);
  CHECK(a.start_sample == b.start_sample);
  CHECK(a.mse == b.mse);
}

// Runs `fn` with 1 thread and with 4 threads.
template <typename Fn>
auto with_threads(int threads, Fn fn) {
  const int saved = omp_get_max_threads();
  omp_set_num_threads(threads);
  auto result = fn();
  omp_set_num_threads(saved);
  return result;
}

}  // namespace

TEST_CASE("static evaluation: parallel equals serial") {
  const auto ds = data(6 * 1440);
  const auto view = arx_view(ds.frame);
  const auto model = fit_least_squares(build_regression(slice_window(ds.frame, 0, 1440), 3));
  const HorizonSpec spec{86400.0, 1800.0};
  const auto ref = serial::evaluate_moving_horizon(model, view, 60.0, spec, 3);
  for (int threads : {1, 2, 4, 7}) {
    check_same(with_threads(threads, [&] { return evaluate_moving_horizon(model, view, 60.0, spec, 3); }), ref);
  }
}

TEST_CASE("adaptive evaluation: parallel equals serial") {
  const auto ds = data(6 * 1440);
  const auto view = arx_view(ds.frame);
  const auto model = fit_least_squares(build_regression(slice_window(ds.frame, 0, 1440), 3));
  FilterTuning t;
  t.Q = Eigen::MatrixXd::Identity(15, 15) * 1e-7;
  t.P0 = Eigen::MatrixXd::Identity(15, 15) * 1e-3;
  t.beta = 1e3;
  const ParameterFilter filter(model.theta(), t);
  const HorizonSpec spec{86400.0, 3600.0};
  const auto ref = serial::evaluate_moving_horizon(filter, 3, view, 60.0, spec, 3);
  for (int threads : {1, 3, 8}) {
    check_same(with_threads(threads, [&] { return evaluate_moving_horizon(filter, 3, view, 60.0, spec, 3); }), ref);
  }
}

TEST_CASE("build_regression: parallel equals serial") {
  const auto ds = data(20000);
  const auto view = arx_view(ds.frame);
  for (int order : {1, 3, 6}) {
    const auto ref = serial::build_regression(view, order);
    const auto par = with_threads(4, [&] { return build_regression(view, order); });
    CHECK(par.phi == ref.phi);
    CHECK(par.target == ref.target);
  }
}

TEST_CASE("savgol: parallel equals serial") {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> nd;
  std::vector<double> x(50000);
  for (auto& v : x) v = nd(gen);
  for (SavGolSpec spec : {SavGolSpec{5, 2}, SavGolSpec{15, 2}, SavGolSpec{31, 4}}) {
    const auto ref = serial::savgol_filter(x, spec);
    CHECK(with_threads(4, [&] { return savgol_filter(x, spec); }) == ref);
  }
}

TEST_CASE("thread count does not change order selection or the monthly suite") {
  const auto ds = data(3 * 1440);
  const auto a = with_threads(1, [&] { return select_order(ds.frame, {1, 2, 3, 4}, {1.0, 2.0, 3.0}); });
  const auto b = with_threads(6, [&] { return select_order(ds.frame, {1, 2, 3, 4}, {1.0, 2.0, 3.0}); });
  REQUIRE(a.table.size() == b.table.size());
  for (std::size_t i = 0; i < a.table.size(); ++i) CHECK(a.table[i].naic == b.table[i].naic);
  CHECK(a.chosen == b.chosen);

  PlantConfig cfg = scenarios::drift_siblings();
  cfg.duration_days = 1.0;
  const auto m1 = with_threads(1, [&] { return monthly_suite(cfg, 4); });
  const auto m4 = with_threads(4, [&] { return monthly_suite(cfg, 4); });
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < m1[i].frame.channel_count(); ++c) {
      CHECK(m1[i].frame.channels()[c].values == m4[i].frame.channels()[c].values);
    }
  }
}
