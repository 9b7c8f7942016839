// Serial reference kernels against their OpenMP versions.

#include <benchmark/benchmark.h>

#include <random>

#include "sbm/eval.hpp"
#include "sbm/preprocess.hpp"
#include "sbm/synthplant.hpp"

using namespace sbm;

namespace {

const ArxDataset& two_weeks() {
  static const ArxDataset ds = [] {
    ArxScenario sc;
    sc.truth = random_stable_model(3, 4, 42);
    sc.length = 14 * 1440 + 3;
    sc.noise_std = 0.3;
    sc.seed = 42;
    return generate_arx_dataset(sc);
  }();
  return ds;
}

const ArxModel& fitted() {
  static const ArxModel m = fit_least_squares(build_regression(slice_window(two_weeks().frame, 0, 7 * 1440), 3));
  return m;
}

ParameterFilter filter() {
  FilterTuning t;
  t.Q = Eigen::MatrixXd::Identity(15, 15) * 1e-8;
  t.P0 = Eigen::MatrixXd::Identity(15, 15) * 1e-3;
  t.beta = 1e6;
  return ParameterFilter(fitted().theta(), t);
}

const std::vector<double>& noisy_signal() {
  static const std::vector<double> v = [] {
    std::mt19937_64 gen(1);
    std::normal_distribution<double> nd;
    std::vector<double> out(30 * 1440);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1e-3 * static_cast<double>(i) + nd(gen);
    return out;
  }();
  return v;
}

void BM_EvalStatic_Serial(benchmark::State& state) {
  const auto data = arx_view(two_weeks().frame);
  for (auto _ : state) benchmark::DoNotOptimize(serial::evaluate_moving_horizon(fitted(), data, 60.0, {}, 3));
}
void BM_EvalStatic_Parallel(benchmark::State& state) {
  const auto data = arx_view(two_weeks().frame);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_moving_horizon(fitted(), data, 60.0, {}, 3));
}
void BM_EvalAdaptive_Serial(benchmark::State& state) {
  const auto data = arx_view(two_weeks().frame);
  const auto f = filter();
  for (auto _ : state) benchmark::DoNotOptimize(serial::evaluate_moving_horizon(f, 3, data, 60.0, {}, 3));
}
void BM_EvalAdaptive_Parallel(benchmark::State& state) {
  const auto data = arx_view(two_weeks().frame);
  const auto f = filter();
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_moving_horizon(f, 3, data, 60.0, {}, 3));
}
void BM_BuildRegression_Serial(benchmark::State& state) {
  const auto data = arx_view(two_weeks().frame);
  for (auto _ : state) benchmark::DoNotOptimize(serial::build_regression(data, static_cast<int>(state.range(0))));
}
void BM_BuildRegression_Parallel(benchmark::State& state) {
  const auto data = arx_view(two_weeks().frame);
  for (auto _ : state) benchmark::DoNotOptimize(build_regression(data, static_cast<int>(state.range(0))));
}
void BM_SavGol_Serial(benchmark::State& state) {
  const SavGolSpec spec{static_cast<int>(state.range(0)), 2};
  for (auto _ : state) benchmark::DoNotOptimize(serial::savgol_filter(noisy_signal(), spec));
}
void BM_SavGol_Parallel(benchmark::State& state) {
  const SavGolSpec spec{static_cast<int>(state.range(0)), 2};
  for (auto _ : state) benchmark::DoNotOptimize(savgol_filter(noisy_signal(), spec));
}

}  // namespace

BENCHMARK(BM_EvalStatic_Serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EvalStatic_Parallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EvalAdaptive_Serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EvalAdaptive_Parallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BuildRegression_Serial)->Arg(3)->Arg(10)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BuildRegression_Parallel)->Arg(3)->Arg(10)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_SavGol_Serial)->Arg(15)->Arg(61)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_SavGol_Parallel)->Arg(15)->Arg(61)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
