// Serial reference vs OpenMP for each kernel. The second argument of every
// benchmark selects the execution mode (0 = serial, 1 = parallel).

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "hemlets/kernels.hpp"

using namespace hemlets;
using kernels::Exec;

namespace {

Exec mode(const benchmark::State& state) { return state.range(1) ? Exec::parallel : Exec::serial; }

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

void BM_RenderGaussianStack(benchmark::State& state) {
  const int grid = static_cast<int>(state.range(0));
  const int layers = 14 * 3;
  std::vector<kernels::GaussianStamp> stamps;
  for (int l = 0; l < layers; ++l) stamps.push_back({l, 0.3 * grid + l % 7, 0.6 * grid - l % 5});
  std::vector<double> stack(static_cast<std::size_t>(layers) * grid * grid);
  for (auto _ : state) {
    std::fill(stack.begin(), stack.end(), 0.0);
    kernels::render_gaussian_stack(mode(state), stack, layers, grid, grid, stamps, {});
    benchmark::DoNotOptimize(stack.data());
  }
}
BENCHMARK(BM_RenderGaussianStack)->ArgsProduct({{64, 128}, {0, 1}});

void BM_RenderVolumeStack(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  std::vector<kernels::VolumeStamp> centers;
  for (int c = 0; c < 18; ++c) centers.push_back({0.4 * side + c % 3, 0.5 * side, 0.3 * side + c % 4});
  std::vector<double> stack(18 * static_cast<std::size_t>(side) * side * side);
  for (auto _ : state) {
    std::fill(stack.begin(), stack.end(), 0.0);
    kernels::render_volume_stack(mode(state), stack, 18, side, side, side, centers, {2, 2, 2}, 3.0);
    benchmark::DoNotOptimize(stack.data());
  }
}
BENCHMARK(BM_RenderVolumeStack)->ArgsProduct({{32, 64}, {0, 1}});

void BM_SoftArgmaxBatch(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const int count = 18 * 8;
  const auto volumes = noise(static_cast<std::size_t>(count) * side * side * side, 1);
  std::vector<double> out(3 * count);
  for (auto _ : state) {
    kernels::soft_argmax_batch(mode(state), volumes, count, side, side, side, 1.0, kernels::WeightMode::logits, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_SoftArgmaxBatch)->ArgsProduct({{16, 32}, {0, 1}});

void BM_Matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = noise(static_cast<std::size_t>(n) * n, 2), b = noise(static_cast<std::size_t>(n) * n, 3);
  std::vector<double> c(static_cast<std::size_t>(n) * n);
  for (auto _ : state) {
    kernels::matmul(mode(state), a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}
BENCHMARK(BM_Matmul)->ArgsProduct({{128, 384}, {0, 1}});

void BM_MatmulAtB(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = noise(static_cast<std::size_t>(n) * n, 4), b = noise(static_cast<std::size_t>(n) * n, 5);
  std::vector<double> c(static_cast<std::size_t>(n) * n, 0.0);
  for (auto _ : state) {
    kernels::matmul_at_b_accumulate(mode(state), a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
}
BENCHMARK(BM_MatmulAtB)->ArgsProduct({{128, 384}, {0, 1}});

void BM_MatmulABt(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = noise(static_cast<std::size_t>(n) * n, 6), b = noise(static_cast<std::size_t>(n) * n, 7);
  std::vector<double> c(static_cast<std::size_t>(n) * n, 0.0);
  for (auto _ : state) {
    kernels::matmul_a_bt_accumulate(mode(state), a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
}
BENCHMARK(BM_MatmulABt)->ArgsProduct({{128, 384}, {0, 1}});

void BM_BlendSkin(benchmark::State& state) {
  const int vertices = static_cast<int>(state.range(0));
  const int joints = 24;
  const auto rest = noise(3 * static_cast<std::size_t>(vertices), 8);
  std::vector<double> weights(static_cast<std::size_t>(vertices) * joints, 1.0 / joints);
  const auto transforms = noise(12 * joints, 9);
  std::vector<double> out(rest.size());
  for (auto _ : state) {
    kernels::blend_skin(mode(state), rest, weights, vertices, joints, transforms, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_BlendSkin)->ArgsProduct({{188, 6890}, {0, 1}});

}  // namespace

BENCHMARK_MAIN();
