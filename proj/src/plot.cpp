#include "cdfh/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "cdfh/error.hpp"
#include "cdfh/io.hpp"

namespace cdfh {

namespace {

constexpr std::array<const char*, 10> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                                  "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  int w, h;
  static constexpr double left = 64, right = 150, top = 36, bottom = 48;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (w - left - right); }
  double py(double y) const { return h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom); }
};

void axes(std::string& s, const Frame& f, const PlotStyle& style) {
  s += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(f.w) + "\" height=\"" +
       std::to_string(f.h) + "\" fill=\"white\"/>\n";
  s += "<text x=\"" + fmt("%.1f", f.w / 2.0) +
       "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(style.title) + "</text>\n";
  const double ax0 = f.px(f.x0), ax1 = f.px(f.x1), ay0 = f.py(f.y0), ay1 = f.py(f.y1);
  s += "<path d=\"M" + fmt("%.3f", ax0) + "," + fmt("%.3f", ay1) + " L" + fmt("%.3f", ax0) + "," +
       fmt("%.3f", ay0) + " L" + fmt("%.3f", ax1) + "," + fmt("%.3f", ay0) +
       "\" stroke=\"black\" fill=\"none\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 5.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 5.0;
    const double tx = f.px(xv), ty = f.py(yv);
    s += "<line x1=\"" + fmt("%.3f", tx) + "\" y1=\"" + fmt("%.3f", ay0) + "\" x2=\"" +
         fmt("%.3f", tx) + "\" y2=\"" + fmt("%.3f", ay0 + 5) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + fmt("%.3f", tx) + "\" y=\"" + fmt("%.3f", ay0 + 18) +
         "\" text-anchor=\"middle\" font-size=\"11\">" + fmt("%.4g", xv) + "</text>\n";
    s += "<line x1=\"" + fmt("%.3f", ax0 - 5) + "\" y1=\"" + fmt("%.3f", ty) + "\" x2=\"" +
         fmt("%.3f", ax0) + "\" y2=\"" + fmt("%.3f", ty) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + fmt("%.3f", ax0 - 8) + "\" y=\"" + fmt("%.3f", ty + 4) +
         "\" text-anchor=\"end\" font-size=\"11\">" + fmt("%.4g", yv) + "</text>\n";
  }
  s += "<text x=\"" + fmt("%.3f", (ax0 + ax1) / 2) + "\" y=\"" + fmt("%.3f", f.h - 10.0) +
       "\" text-anchor=\"middle\" font-size=\"12\">" + escape(style.x_label) + "</text>\n";
  s += "<text x=\"16\" y=\"" + fmt("%.3f", (ay0 + ay1) / 2) +
       "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 " +
       fmt("%.3f", (ay0 + ay1) / 2) + ")\">" + escape(style.y_label) + "</text>\n";
}

void polyline(std::string& s, const Frame& f, std::span<const double> xs,
              std::span<const double> ys, const char* color) {
  s += "<polyline fill=\"none\" stroke=\"";
  s += color;
  s += "\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ' ';
    s += fmt("%.3f", f.px(xs[i])) + "," + fmt("%.3f", f.py(ys[i]));
  }
  s += "\"/>\n";
}

void legend(std::string& s, const Frame& f, std::size_t i, const std::string& label,
            const char* color) {
  const double x = f.w - Frame::right + 12;
  const double y = Frame::top + 14.0 * static_cast<double>(i);
  s += "<line x1=\"" + fmt("%.1f", x) + "\" y1=\"" + fmt("%.1f", y) + "\" x2=\"" +
       fmt("%.1f", x + 18) + "\" y2=\"" + fmt("%.1f", y) + "\" stroke=\"" + color +
       "\" stroke-width=\"2\"/>\n";
  s += "<text x=\"" + fmt("%.1f", x + 22) + "\" y=\"" + fmt("%.1f", y + 4) +
       "\" font-size=\"11\">" + escape(label) + "</text>\n";
}

std::string header(int w, int h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" "
         "width=\"" + std::to_string(w) + "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " +
         std::to_string(w) + " " + std::to_string(h) + "\">\n";
}

}  // namespace

std::string render_cdf_svg(std::span<const LabeledCdf> curves, const PlotStyle& style) {
  if (curves.empty()) throw Error(ErrorCode::EmptyInput, "no curves to plot");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& c : curves) {
    lo = std::min(lo, c.cdf.lo());
    hi = std::max(hi, c.cdf.hi());
  }
  for (const auto& m : style.markers) {
    lo = std::min(lo, m.first);
    hi = std::max(hi, m.first);
  }
  const Frame f{lo, hi, 0.0, 1.0, style.width, style.height};
  std::string s = header(style.width, style.height);
  axes(s, f, style);
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = kPalette[i % kPalette.size()];
    polyline(s, f, curves[i].cdf.xs(), curves[i].cdf.ps(), color);
    legend(s, f, i, curves[i].label, color);
  }
  for (const auto& m : style.markers)
    s += "<circle cx=\"" + fmt("%.3f", f.px(m.first)) + "\" cy=\"" + fmt("%.3f", f.py(m.second)) +
         "\" r=\"4\" fill=\"black\"/>\n";
  s += "</svg>\n";
  return s;
}

std::string render_curves_csv(std::span<const LabeledCdf> curves) {
  std::string s = "label,intensity,cumulative_probability\n";
  char buf[96];
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.cdf.size(); ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", c.cdf.xs()[i], c.cdf.ps()[i]);
      s += c.label;
      s += buf;
    }
  return s;
}

void emit_cdf_plot(std::span<const LabeledCdf> curves, const std::filesystem::path& svg_path,
                   const PlotStyle& style) {
  const std::string svg = render_cdf_svg(curves, style);
  const std::string csv = render_curves_csv(curves);
  write_text(svg_path, svg);
  auto csv_path = svg_path;
  csv_path.replace_extension(".csv");
  write_text(csv_path, csv);
}

std::string render_map_svg(std::span<const std::pair<double, double>> points,
                           const PlotStyle& style) {
  if (points.size() < 2) throw Error(ErrorCode::EmptyInput, "need at least two points");
  std::vector<double> xs, ys;
  for (const auto& [x, y] : points) {
    xs.push_back(x);
    ys.push_back(y);
  }
  const auto [ymin, ymax] = std::minmax_element(ys.begin(), ys.end());
  double y0 = *ymin, y1 = *ymax;
  if (y0 == y1) {
    y0 -= 1;
    y1 += 1;
  }
  const Frame f{xs.front(), xs.back(), y0, y1, style.width, style.height};
  std::string s = header(style.width, style.height);
  axes(s, f, style);
  polyline(s, f, xs, ys, kPalette[0]);
  legend(s, f, 0, "LUT", kPalette[0]);
  s += "</svg>\n";
  return s;
}

}  // namespace cdfh
