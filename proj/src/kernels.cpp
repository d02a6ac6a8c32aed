#include "cdfh/kernels.hpp"

#include <cmath>

namespace cdfh::kernels {
namespace {

inline bool included(double v, double excluded) { return !(v == excluded); }

inline double ecdf_at(std::span<const double> support, std::span<const double> cumulative,
                      double x) {
  if (x < support.front()) return 0.0;
  if (x >= support.back()) return 1.0;
  const auto it = std::upper_bound(support.begin(), support.end(), x);
  const auto k = static_cast<std::size_t>(it - support.begin());  // support[k-1] <= x < support[k]
  const double x0 = support[k - 1];
  if (x == x0) return cumulative[k - 1];
  const double t = (x - x0) / (support[k] - x0);
  return cumulative[k - 1] + t * (cumulative[k] - cumulative[k - 1]);
}

}  // namespace

Moments moments_serial(std::span<const double> values, double excluded) {
  Moments m;
  double sum = 0.0;
  for (double v : values) {
    if (!included(v, excluded)) continue;
    sum += v;
    ++m.count;
  }
  if (m.count == 0) return m;
  m.mean = sum / static_cast<double>(m.count);
  double ss = 0.0;
  for (double v : values) {
    if (!included(v, excluded)) continue;
    const double d = v - m.mean;
    ss += d * d;
  }
  m.variance = ss / static_cast<double>(m.count);
  return m;
}

Moments moments_omp(std::span<const double> values, double excluded) {
  const std::size_t n = values.size();
  const auto nblocks = static_cast<std::int64_t>((n + kBlock - 1) / kBlock);
  std::vector<double> block_sum(static_cast<std::size_t>(nblocks), 0.0);
  std::vector<std::size_t> block_count(static_cast<std::size_t>(nblocks), 0);
  const double* v = values.data();

#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < nblocks; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
    const std::size_t hi = std::min(n, lo + kBlock);
    double s = 0.0;
    std::size_t c = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      if (!included(v[i], excluded)) continue;
      s += v[i];
      ++c;
    }
    block_sum[static_cast<std::size_t>(b)] = s;
    block_count[static_cast<std::size_t>(b)] = c;
  }

  Moments m;
  double sum = 0.0;
  for (std::size_t b = 0; b < block_sum.size(); ++b) {
    sum += block_sum[b];
    m.count += block_count[b];
  }
  if (m.count == 0) return m;
  m.mean = sum / static_cast<double>(m.count);

  const double mean = m.mean;
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < nblocks; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
    const std::size_t hi = std::min(n, lo + kBlock);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      if (!included(v[i], excluded)) continue;
      const double d = v[i] - mean;
      s += d * d;
    }
    block_sum[static_cast<std::size_t>(b)] = s;
  }
  double ss = 0.0;
  for (double s : block_sum) ss += s;
  m.variance = ss / static_cast<double>(m.count);
  return m;
}

void ecdf_on_grid_serial(std::span<const double> support, std::span<const double> cumulative,
                         std::span<const double> grid, std::span<double> out) {
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = ecdf_at(support, cumulative, grid[i]);
}

void ecdf_on_grid_omp(std::span<const double> support, std::span<const double> cumulative,
                      std::span<const double> grid, std::span<double> out) {
  const auto n = static_cast<std::int64_t>(grid.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] = ecdf_at(support, cumulative, grid[k]);
  }
}

std::size_t first_decrease(std::span<const double> values) {
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] < values[i - 1]) return i;
  return values.size();
}

}  // namespace cdfh::kernels
