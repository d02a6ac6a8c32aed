#pragma once

// Data-parallel inner loops. Every OpenMP kernel has a *_serial twin that is
// the reference for tests and benchmarks. The parallel versions are
// bitwise-deterministic regardless of thread count: element-wise maps write
// disjoint slots, and reductions use a fixed block partition combined in
// block order.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cdfh::kernels {

/// Reduction block length. Fixed so results do not depend on thread count.
inline constexpr std::size_t kBlock = 4096;

struct Moments {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // population (divide by N)
};

template <class F>
void map_serial(std::span<const double> in, std::span<double> out, F&& f) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
}

template <class F>
void map_omp(std::span<const double> in, std::span<double> out, F&& f) {
  const auto n = static_cast<std::int64_t>(in.size());
  const double* src = in.data();
  double* dst = out.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) dst[i] = f(src[i]);
}

/// Mean/variance over voxels != excluded (pass NaN to include everything).
Moments moments_serial(std::span<const double> values, double excluded);
Moments moments_omp(std::span<const double> values, double excluded);

/// Evaluates the interpolated empirical CDF on `grid`. `support` holds the
/// distinct sorted sample values and `cumulative` the matching fractions of
/// samples <= support[k]. Between support points the CDF is linear.
void ecdf_on_grid_serial(std::span<const double> support, std::span<const double> cumulative,
                         std::span<const double> grid, std::span<double> out);
void ecdf_on_grid_omp(std::span<const double> support, std::span<const double> cumulative,
                      std::span<const double> grid, std::span<double> out);

/// First index where out[i] < out[i-1] (i.e. a monotonicity violation), or
/// values.size() when the sequence is non-decreasing.
std::size_t first_decrease(std::span<const double> values);

}  // namespace cdfh::kernels
