#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cdfh/cdf.hpp"

namespace cdfh {

struct LabeledCdf {
  std::string label;
  EmpiricalCdf cdf;
};

struct PlotStyle {
  std::string title;
  std::string x_label = "intensity";
  std::string y_label = "cumulative probability";
  int width = 640;
  int height = 420;
  /// Extra point markers, e.g. template control points as (intensity, p).
  std::vector<std::pair<double, double>> markers;
};

/// Writes a self-contained SVG (one polyline per curve, one vertex per grid
/// point) and a companion long-format CSV "label,intensity,cumulative_probability"
/// next to it with the .csv extension. Output bytes depend only on the inputs.
/// Throws EmptyInput before touching the filesystem when `curves` is empty.
void emit_cdf_plot(std::span<const LabeledCdf> curves, const std::filesystem::path& svg_path,
                   const PlotStyle& style = {});

std::string render_cdf_svg(std::span<const LabeledCdf> curves, const PlotStyle& style);
std::string render_curves_csv(std::span<const LabeledCdf> curves);

/// Two-column "input,output" table of any monotone map sampled over [lo, hi].
template <class F>
std::vector<std::pair<double, double>> sample_map(F&& f, double lo, double hi, std::size_t n) {
  std::vector<std::pair<double, double>> out;
  out.reserve(n);
  for (double x : linspace(lo, hi, n)) out.emplace_back(x, f(x));
  return out;
}

/// Line plot of (input, output) pairs, used for LUT inspection.
std::string render_map_svg(std::span<const std::pair<double, double>> points,
                           const PlotStyle& style);

}  // namespace cdfh
