// Serial reference vs OpenMP kernels on volume-sized inputs.
// Run with OMP_NUM_THREADS set to compare thread counts.

#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>

#include "cdfh/cdf.hpp"
#include "cdfh/kernels.hpp"
#include "cdfh/transform.hpp"

namespace {

using namespace cdfh;

std::vector<double> voxels(std::size_t n) {
  std::mt19937_64 rng(7);
  std::lognormal_distribution<double> d(6.0, 0.4);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

Volume volume(std::size_t n) { return Volume(Dims{n, 1, 1}, voxels(n), "T2"); }

IntensityLut lut() {
  const DualScaleParams p{1.3, 0.8, 1650, {250, 400, 900}};
  TailSpec t;
  t.top = TopTail{3300, lut_ds(5000, p), 4095};
  return IntensityLut(p, t, {1, 5000});
}

void BM_apply_lut_serial(benchmark::State& s) {
  const auto v = volume(static_cast<std::size_t>(s.range(0)));
  const auto l = lut();
  for (auto _ : s) benchmark::DoNotOptimize(apply_lut_serial(v, l));
  s.SetItemsProcessed(s.iterations() * s.range(0));
}

void BM_apply_lut_omp(benchmark::State& s) {
  const auto v = volume(static_cast<std::size_t>(s.range(0)));
  const auto l = lut();
  for (auto _ : s) benchmark::DoNotOptimize(apply_lut(v, l));
  s.SetItemsProcessed(s.iterations() * s.range(0));
}

void BM_moments_serial(benchmark::State& s) {
  const auto v = voxels(static_cast<std::size_t>(s.range(0)));
  for (auto _ : s) benchmark::DoNotOptimize(kernels::moments_serial(v, 0.0));
  s.SetItemsProcessed(s.iterations() * s.range(0));
}

void BM_moments_omp(benchmark::State& s) {
  const auto v = voxels(static_cast<std::size_t>(s.range(0)));
  for (auto _ : s) benchmark::DoNotOptimize(kernels::moments_omp(v, 0.0));
  s.SetItemsProcessed(s.iterations() * s.range(0));
}

struct EcdfInput {
  std::vector<double> support, cumulative, grid, out;
};

EcdfInput ecdf_input(std::size_t n) {
  EcdfInput e;
  e.support = voxels(n);
  std::sort(e.support.begin(), e.support.end());
  e.support.erase(std::unique(e.support.begin(), e.support.end()), e.support.end());
  for (std::size_t i = 0; i < e.support.size(); ++i)
    e.cumulative.push_back(static_cast<double>(i + 1) / static_cast<double>(e.support.size()));
  e.grid = linspace(e.support.front(), e.support.back(), 1024);
  e.out.resize(e.grid.size());
  return e;
}

void BM_ecdf_grid_serial(benchmark::State& s) {
  auto e = ecdf_input(static_cast<std::size_t>(s.range(0)));
  for (auto _ : s) {
    kernels::ecdf_on_grid_serial(e.support, e.cumulative, e.grid, e.out);
    benchmark::DoNotOptimize(e.out.data());
  }
}

void BM_ecdf_grid_omp(benchmark::State& s) {
  auto e = ecdf_input(static_cast<std::size_t>(s.range(0)));
  for (auto _ : s) {
    kernels::ecdf_on_grid_omp(e.support, e.cumulative, e.grid, e.out);
    benchmark::DoNotOptimize(e.out.data());
  }
}

void BM_build_cdf(benchmark::State& s) {
  const auto v = volume(static_cast<std::size_t>(s.range(0)));
  for (auto _ : s) benchmark::DoNotOptimize(build_cdf(v));
  s.SetItemsProcessed(s.iterations() * s.range(0));
}

}  // namespace

BENCHMARK(BM_apply_lut_serial)->Arg(1 << 16)->Arg(1 << 22);
BENCHMARK(BM_apply_lut_omp)->Arg(1 << 16)->Arg(1 << 22);
BENCHMARK(BM_moments_serial)->Arg(1 << 16)->Arg(1 << 22);
BENCHMARK(BM_moments_omp)->Arg(1 << 16)->Arg(1 << 22);
BENCHMARK(BM_ecdf_grid_serial)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_ecdf_grid_omp)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_build_cdf)->Arg(1 << 20);

BENCHMARK_MAIN();
