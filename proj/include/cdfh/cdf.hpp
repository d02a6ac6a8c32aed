#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdfh/volume.hpp"

namespace cdfh {

inline constexpr std::size_t kDefaultGridSize = 1024;

/// Piecewise-linear cumulative distribution sampled at strictly increasing
/// intensities. Immutable; the constructor enforces the invariants
/// (xs strictly increasing, ps non-decreasing in [0,1], ps.back() == 1).
class EmpiricalCdf {
 public:
  EmpiricalCdf(std::vector<double> xs, std::vector<double> ps, std::size_t n_samples = 0);

  std::span<const double> xs() const noexcept { return xs_; }
  std::span<const double> ps() const noexcept { return ps_; }
  std::size_t size() const noexcept { return xs_.size(); }
  /// Number of voxels the curve was estimated from (0 when unknown, e.g. loaded from CSV).
  std::size_t n_samples() const noexcept { return n_samples_; }
  double lo() const noexcept { return xs_.front(); }
  double hi() const noexcept { return xs_.back(); }

  /// Inverse CDF for p in (0, 1]. Clamps to xs[0] below ps[0].
  double quantile(double p) const;
  /// Forward CDF. Ramps linearly from 0 one grid step below xs[0] up to
  /// ps[0], and saturates at 1 from xs.back() on.
  double value(double x) const;

  bool operator==(const EmpiricalCdf&) const = default;

 private:
  std::vector<double> xs_;
  std::vector<double> ps_;
  std::size_t n_samples_;
};

enum class Background { Exclude, Include };

/// Interpolated empirical CDF of the volume intensities on a uniform grid of
/// `grid_size` points spanning [min, max]. At every distinct sample value u
/// the curve equals #{samples <= u} / n; between distinct values it is linear.
EmpiricalCdf build_cdf(const Volume& vol, Background background = Background::Exclude,
                       std::size_t grid_size = kDefaultGridSize);
EmpiricalCdf build_cdf(std::span<const double> samples, std::size_t grid_size = kDefaultGridSize);

inline double quantile(const EmpiricalCdf& cdf, double p) { return cdf.quantile(p); }
inline double cdf_value(const EmpiricalCdf& cdf, double x) { return cdf.value(x); }

/// (x - mean) / std over foreground voxels, population std. Background voxels
/// keep background_value. A foreground voxel that lands exactly on the
/// background value after standardization is indistinguishable from
/// background downstream.
Volume zscore_standardize(const Volume& vol);

/// Equal-weight pointwise mean of the curves resampled onto a uniform grid
/// spanning the union of their supports. Bitwise invariant to input order.
EmpiricalCdf average_cdfs(std::span<const EmpiricalCdf> cdfs,
                          std::size_t grid_size = kDefaultGridSize);

/// sup_x |F_a(x) - F_b(x)|, exact for the piecewise-linear representation.
double ks_distance(const EmpiricalCdf& a, const EmpiricalCdf& b);

/// Uniform grid helper shared by the estimators; last point is exactly `hi`.
std::vector<double> linspace(double lo, double hi, std::size_t n);

// Two-column CSV with header "intensity,cumulative_probability".
std::string to_csv(const EmpiricalCdf& cdf);
EmpiricalCdf cdf_from_csv(std::string_view text);
void write_cdf_csv(const EmpiricalCdf& cdf, const std::filesystem::path& path);
EmpiricalCdf read_cdf_csv(const std::filesystem::path& path);

}  // namespace cdfh
