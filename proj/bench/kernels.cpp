#include <benchmark/benchmark.h>

#include "wasscert/network.hpp"
#include "wasscert/transport.hpp"

using namespace wasscert;

namespace {

EmpiricalMeasure cloud(std::size_t n, std::uint64_t stream) {
  return EmpiricalMeasure(sample_points(SamplingDistribution::uniform_cube(3), n, Seed{1, stream}));
}

void BM_CostMatrix(benchmark::State& state) {
  const auto a = cloud(state.range(0), 0), b = cloud(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(cost_matrix(a, b, 2.0));
}

void BM_CostMatrixSerial(benchmark::State& state) {
  const auto a = cloud(state.range(0), 0), b = cloud(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(cost_matrix_serial(a, b, 2.0));
}

struct LossFixture {
  MlpParams params;
  PointCloud points;
  std::vector<double> targets, grad;

  explicit LossFixture(std::size_t n)
      : params(init_params(MlpSpec{{3, 64, 64, 1}}, Seed{2, 0})),
        points(sample_points(SamplingDistribution::uniform_cube(3), n, Seed{2, 1})),
        targets(n, 0.5),
        grad(param_count(params.spec())) {}
};

void BM_LossGradient(benchmark::State& state) {
  LossFixture fx(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(fx.params, fx.points, fx.targets, 2.0, fx.grad));
}

void BM_LossGradientSerial(benchmark::State& state) {
  LossFixture fx(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss_and_gradient_serial(fx.params, fx.points, fx.targets, 2.0, fx.grad));
  }
}

void BM_ExactAssignment(benchmark::State& state) {
  const auto a = cloud(state.range(0), 0), b = cloud(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(wasserstein_exact(a, b, 1.0));
}

}  // namespace

BENCHMARK(BM_CostMatrix)->Arg(256)->Arg(1024)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_CostMatrixSerial)->Arg(256)->Arg(1024)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LossGradient)->Arg(1024)->Arg(8192)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LossGradientSerial)->Arg(1024)->Arg(8192)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ExactAssignment)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
