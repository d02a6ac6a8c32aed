#include "cdfh/cdf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "cdfh/error.hpp"
#include "cdfh/kernels.hpp"

namespace cdfh {

EmpiricalCdf::EmpiricalCdf(std::vector<double> xs, std::vector<double> ps, std::size_t n_samples)
    : xs_(std::move(xs)), ps_(std::move(ps)), n_samples_(n_samples) {
  if (xs_.size() < 2 || xs_.size() != ps_.size())
    throw Error(ErrorCode::InvalidArgument, "cdf needs >= 2 points and matching xs/ps lengths");
  for (std::size_t i = 0; i < xs_.size(); ++i) {
    if (!std::isfinite(xs_[i]) || !std::isfinite(ps_[i]))
      throw Error(ErrorCode::InvalidArgument, "cdf contains non-finite values");
    if (ps_[i] < 0.0 || ps_[i] > 1.0 + 1e-12)
      throw Error(ErrorCode::InvalidArgument, "cdf probability outside [0,1]");
    if (i > 0 && !(xs_[i] > xs_[i - 1]))
      throw Error(ErrorCode::InvalidArgument, "cdf xs not strictly increasing");
    if (i > 0 && ps_[i] < ps_[i - 1])
      throw Error(ErrorCode::InvalidArgument, "cdf ps decreasing");
  }
  if (std::abs(ps_.back() - 1.0) > 1e-12)
    throw Error(ErrorCode::InvalidArgument, "cdf does not end at probability 1");
  ps_.back() = 1.0;
}

double EmpiricalCdf::quantile(double p) const {
  if (!(p > 0.0 && p <= 1.0))
    throw Error(ErrorCode::OutOfRange, "quantile probability must lie in (0, 1]");
  if (p <= ps_.front()) return xs_.front();
  const auto it = std::lower_bound(ps_.begin(), ps_.end(), p);
  const auto i = static_cast<std::size_t>(it - ps_.begin());  // ps[i-1] < p <= ps[i]
  if (ps_[i] == p) return xs_[i];
  const double t = (p - ps_[i - 1]) / (ps_[i] - ps_[i - 1]);
  return xs_[i - 1] + t * (xs_[i] - xs_[i - 1]);
}

double EmpiricalCdf::value(double x) const {
  if (x >= xs_.back()) return 1.0;
  if (x < xs_.front()) {
    const double h = xs_[1] - xs_[0];
    const double start = xs_.front() - h;
    if (x <= start) return 0.0;
    return ps_.front() * (x - start) / h;
  }
  const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  const auto k = static_cast<std::size_t>(it - xs_.begin());  // xs[k-1] <= x < xs[k]
  if (x == xs_[k - 1]) return ps_[k - 1];
  const double t = (x - xs_[k - 1]) / (xs_[k] - xs_[k - 1]);
  return ps_[k - 1] + t * (ps_[k] - ps_[k - 1]);
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "grid size must be >= 2");
  std::vector<double> g(n);
  const double span = hi - lo;
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + span * (static_cast<double>(i) / denom);
  g.front() = lo;
  g.back() = hi;
  return g;
}

namespace {

EmpiricalCdf cdf_from_sorted(std::vector<double>& sorted, std::size_t grid_size) {
  const std::size_t n = sorted.size();
  std::vector<double> support;
  std::vector<double> cumulative;
  support.reserve(n);
  cumulative.reserve(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Last index of each tie run carries the count of samples <= value.
    if (i + 1 < n && sorted[i + 1] == sorted[i]) continue;
    support.push_back(sorted[i]);
    cumulative.push_back(static_cast<double>(i + 1) * inv_n);
  }
  if (support.size() < 2)
    throw Error(ErrorCode::DegenerateConstant, "need at least two distinct intensities");
  cumulative.back() = 1.0;

  auto xs = linspace(support.front(), support.back(), grid_size);
  if (kernels::first_decrease(xs) != xs.size() ||
      std::adjacent_find(xs.begin(), xs.end()) != xs.end())
    throw Error(ErrorCode::DegenerateConstant, "intensity range too narrow for the grid");
  std::vector<double> ps(grid_size);
  kernels::ecdf_on_grid_omp(support, cumulative, xs, ps);
  return EmpiricalCdf(std::move(xs), std::move(ps), n);
}

}  // namespace

EmpiricalCdf build_cdf(const Volume& vol, Background background, std::size_t grid_size) {
  std::vector<double> samples;
  samples.reserve(vol.size());
  if (background == Background::Exclude) {
    for (double v : vol.voxels())
      if (!vol.is_background(v)) samples.push_back(v);
    if (samples.empty()) throw Error(ErrorCode::AllBackground, "every voxel is background");
  } else {
    samples.assign(vol.voxels().begin(), vol.voxels().end());
  }
  std::sort(samples.begin(), samples.end());
  return cdf_from_sorted(samples, grid_size);
}

EmpiricalCdf build_cdf(std::span<const double> samples, std::size_t grid_size) {
  if (samples.empty()) throw Error(ErrorCode::EmptyInput, "no samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  if (!std::all_of(sorted.begin(), sorted.end(), [](double v) { return std::isfinite(v); }))
    throw Error(ErrorCode::InvalidArgument, "non-finite sample");
  std::sort(sorted.begin(), sorted.end());
  return cdf_from_sorted(sorted, grid_size);
}

Volume zscore_standardize(const Volume& vol) {
  const double bg = vol.background_value();
  const auto m = kernels::moments_omp(vol.voxels(), bg);
  if (m.count == 0) throw Error(ErrorCode::AllBackground, "no foreground voxels to standardize");
  const double sd = std::sqrt(m.variance);
  if (!(sd > 0.0)) throw Error(ErrorCode::DegenerateConstant, "foreground has zero variance");
  std::vector<double> out(vol.size());
  const double mean = m.mean;
  kernels::map_omp(vol.voxels(), out,
                   [=](double v) { return v == bg ? v : (v - mean) / sd; });
  return vol.with_voxels(std::move(out));
}

EmpiricalCdf average_cdfs(std::span<const EmpiricalCdf> cdfs, std::size_t grid_size) {
  if (cdfs.empty()) throw Error(ErrorCode::EmptyInput, "no cdfs to average");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  std::size_t n_samples = 0;
  for (const auto& c : cdfs) {
    lo = std::min(lo, c.lo());
    hi = std::max(hi, c.hi());
    n_samples += c.n_samples();
  }
  auto xs = linspace(lo, hi, grid_size);
  if (std::adjacent_find(xs.begin(), xs.end()) != xs.end())
    throw Error(ErrorCode::DegenerateConstant, "union support too narrow for the grid");

  std::vector<double> ps(grid_size);
  std::vector<double> column(cdfs.size());
  const double inv = 1.0 / static_cast<double>(cdfs.size());
  for (std::size_t i = 0; i < grid_size; ++i) {
    for (std::size_t k = 0; k < cdfs.size(); ++k) column[k] = cdfs[k].value(xs[i]);
    // Sorted summation makes the result independent of input order.
    std::sort(column.begin(), column.end());
    double s = 0.0;
    for (double v : column) s += v;
    ps[i] = s * inv;
  }
  for (std::size_t i = 1; i < grid_size; ++i) ps[i] = std::max(ps[i], ps[i - 1]);
  const double last = ps.back();
  if (last != 1.0)
    for (double& p : ps) p /= last;
  return EmpiricalCdf(std::move(xs), std::move(ps), n_samples);
}

double ks_distance(const EmpiricalCdf& a, const EmpiricalCdf& b) {
  // Both curves are piecewise linear, so the sup is attained at a breakpoint
  // of either one (grid nodes plus the start of the left ramp).
  std::vector<double> nodes;
  nodes.reserve(a.size() + b.size() + 2);
  nodes.insert(nodes.end(), a.xs().begin(), a.xs().end());
  nodes.insert(nodes.end(), b.xs().begin(), b.xs().end());
  nodes.push_back(a.xs()[0] - (a.xs()[1] - a.xs()[0]));
  nodes.push_back(b.xs()[0] - (b.xs()[1] - b.xs()[0]));
  double d = 0.0;
  for (double x : nodes) d = std::max(d, std::abs(a.value(x) - b.value(x)));
  return d;
}

std::string to_csv(const EmpiricalCdf& cdf) {
  std::string out = "intensity,cumulative_probability\n";
  char buf[96];
  for (std::size_t i = 0; i < cdf.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", cdf.xs()[i], cdf.ps()[i]);
    out += buf;
  }
  return out;
}

EmpiricalCdf cdf_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("intensity,cumulative_probability", 0) != 0)
    throw Error(ErrorCode::SchemaMismatch, "missing cdf csv header");
  std::vector<double> xs, ps;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::SchemaMismatch, "bad cdf csv row: " + line);
    try {
      xs.push_back(std::stod(line.substr(0, comma)));
      ps.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw Error(ErrorCode::SchemaMismatch, "bad cdf csv row: " + line);
    }
  }
  return EmpiricalCdf(std::move(xs), std::move(ps));
}

void write_cdf_csv(const EmpiricalCdf& cdf, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  out << to_csv(cdf);
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

EmpiricalCdf read_cdf_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return cdf_from_csv(ss.str());
}

}  // namespace cdfh
