#include "cdfh/transform.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cdfh/cdf.hpp"
#include "cdfh/error.hpp"
#include "cdfh/kernels.hpp"

namespace cdfh {

void DualScaleParams::validate(double ratio_cap) const {
  if (!(sigma_bottom > 0.0) || !(sigma_top > 0.0) || !std::isfinite(sigma_bottom) ||
      !std::isfinite(sigma_top))
    throw Error(ErrorCode::InvalidArgument, "scale factors must be positive and finite");
  if (!std::isfinite(shift)) throw Error(ErrorCode::InvalidArgument, "shift must be finite");
  if (!pivots.valid())
    throw Error(ErrorCode::InvalidArgument, "pivots must satisfy v_B < v_M < v_T");
  const double ratio = std::max(sigma_bottom, sigma_top) / std::min(sigma_bottom, sigma_top);
  if (ratio > ratio_cap)
    throw Error(ErrorCode::InvalidArgument, "scale ratio exceeds cap");
}

void TailSpec::validate() const {
  if (top && !(top->start < top->clip && top->start < top->max))
    throw Error(ErrorCode::BadTailSpec, "top tail requires v_T < v_clipT and v_T < v_max");
  if (bottom && !(bottom->clip < bottom->start && bottom->min < bottom->start))
    throw Error(ErrorCode::BadTailSpec, "bottom tail requires v_clipB < v_B and v_min < v_B");
}

double blend(double x, const PivotTriple& pivots) {
  // Piecewise-linear map (v_B,-2), (v_M,0), (v_T,2), end segments extended.
  const double arg = x < pivots.middle ? -2.0 * (pivots.middle - x) / (pivots.middle - pivots.bottom)
                                       : 2.0 * (x - pivots.middle) / (pivots.top - pivots.middle);
  // 1 - (erf(a) + 1) / 2 == erfc(a) / 2; erfc keeps resolution in the right tail.
  return 0.5 * std::erfc(arg);
}

double sigma_blend(double x, const DualScaleParams& params) {
  const double b = blend(x, params.pivots);
  return params.sigma_top + b * (params.sigma_bottom - params.sigma_top);
}

double lut_ds(double x, const DualScaleParams& params) {
  return (x - params.pivots.middle) * sigma_blend(x, params) + params.shift;
}

double lut_top_tail(double x, double v_T, double v_max, double v_clipT) {
  if (!(v_T < v_max) || !(v_T < v_clipT))
    throw Error(ErrorCode::BadTailSpec, "top tail requires v_T < v_max and v_T < v_clipT");
  if (x < v_T) return x;
  const double r_s = v_max - v_T;
  const double r_t = v_clipT - v_T;
  return v_T + r_t * std::erf(2.0 * (x - v_T) / r_s);
}

double lut_bottom_tail(double x, double v_B, double v_min, double v_clipB, double /*v_max*/) {
  if (!(v_min < v_B) || !(v_clipB < v_B))
    throw Error(ErrorCode::BadTailSpec, "bottom tail requires v_min < v_B and v_clipB < v_B");
  if (x > v_B) return x;
  return v_B - (v_B - v_clipB) * std::erf(2.0 * (v_B - x) / (v_B - v_min));
}

IntensityLut::IntensityLut(DualScaleParams params, TailSpec tails, Interval domain,
                           double ratio_cap)
    : params_(params), tails_(tails), domain_(domain) {
  params_.validate(ratio_cap);
  tails_.validate();
  if (!(domain_.lo < domain_.hi) || !std::isfinite(domain_.lo) || !std::isfinite(domain_.hi))
    throw Error(ErrorCode::InvalidArgument, "lut domain must be a finite non-empty interval");
  if (tails_.top || tails_.bottom) {
    Interval c{-HUGE_VAL, HUGE_VAL};
    if (tails_.bottom) c.lo = tails_.bottom->clip;
    if (tails_.top) c.hi = tails_.top->clip;
    clamp_ = c;
  }

  const auto grid = linspace(domain_.lo, domain_.hi, kMonotoneCheckPoints);
  std::vector<double> mapped(grid.size());
  kernels::map_omp(grid, mapped, [this](double x) { return (*this)(x); });
  const auto bad = kernels::first_decrease(mapped);
  if (bad != mapped.size())
    throw Error(ErrorCode::NonMonotone,
                "intensity map decreases near x=" + std::to_string(grid[bad]));
}

double IntensityLut::operator()(double x) const noexcept {
  x = std::clamp(x, domain_.lo, domain_.hi);
  double y = lut_ds(x, params_);
  if (tails_.top && y > tails_.top->start) {
    const auto& t = *tails_.top;
    y = t.start + (t.clip - t.start) * std::erf(2.0 * (y - t.start) / (t.max - t.start));
  }
  if (tails_.bottom && y < tails_.bottom->start) {
    const auto& b = *tails_.bottom;
    y = b.start - (b.start - b.clip) * std::erf(2.0 * (b.start - y) / (b.start - b.min));
  }
  if (clamp_) y = std::clamp(y, clamp_->lo, clamp_->hi);
  return y;
}

namespace {

template <bool Parallel>
Volume apply_impl(const Volume& vol, const IntensityLut& lut, bool preserve_background) {
  std::vector<double> out(vol.size());
  const double bg = vol.background_value();
  auto f = [&lut, bg, preserve_background](double v) {
    return (preserve_background && v == bg) ? v : lut(v);
  };
  if constexpr (Parallel)
    kernels::map_omp(vol.voxels(), out, f);
  else
    kernels::map_serial(vol.voxels(), out, f);
  return vol.with_voxels(std::move(out));
}

}  // namespace

Volume apply_lut(const Volume& vol, const IntensityLut& lut, bool preserve_background) {
  return apply_impl<true>(vol, lut, preserve_background);
}

Volume apply_lut_serial(const Volume& vol, const IntensityLut& lut, bool preserve_background) {
  return apply_impl<false>(vol, lut, preserve_background);
}

using nlohmann::json;

json to_json(const PivotTriple& p) { return {{"v_B", p.bottom}, {"v_M", p.middle}, {"v_T", p.top}}; }

json to_json(const DualScaleParams& p) {
  return {{"sigma_B", p.sigma_bottom},
          {"sigma_T", p.sigma_top},
          {"gamma", p.shift},
          {"pivots", to_json(p.pivots)}};
}

json to_json(const TailSpec& t) {
  json j;
  j["enabled_top"] = t.top.has_value();
  j["enabled_bottom"] = t.bottom.has_value();
  if (t.top) {
    j["v_T"] = t.top->start;
    j["v_max"] = t.top->max;
    j["v_clipT"] = t.top->clip;
  }
  if (t.bottom) {
    j["v_B"] = t.bottom->start;
    j["v_min"] = t.bottom->min;
    j["v_clipB"] = t.bottom->clip;
  }
  j["reflect"] = t.reflect;
  return j;
}

json to_json(const IntensityLut& lut) {
  json j;
  j["params"] = to_json(lut.params());
  j["tails"] = to_json(lut.tails());
  j["domain"] = {lut.domain().lo, lut.domain().hi};
  if (lut.hard_clamp())
    j["hard_clamp"] = {lut.hard_clamp()->lo, lut.hard_clamp()->hi};
  else
    j["hard_clamp"] = nullptr;
  return j;
}

PivotTriple pivots_from_json(const json& j) {
  return {j.at("v_B").get<double>(), j.at("v_M").get<double>(), j.at("v_T").get<double>()};
}

DualScaleParams params_from_json(const json& j) {
  DualScaleParams p;
  p.sigma_bottom = j.at("sigma_B").get<double>();
  p.sigma_top = j.at("sigma_T").get<double>();
  p.shift = j.at("gamma").get<double>();
  p.pivots = pivots_from_json(j.at("pivots"));
  return p;
}

TailSpec tails_from_json(const json& j) {
  TailSpec t;
  if (j.at("enabled_top").get<bool>())
    t.top = TopTail{j.at("v_T").get<double>(), j.at("v_max").get<double>(),
                    j.at("v_clipT").get<double>()};
  if (j.at("enabled_bottom").get<bool>())
    t.bottom = BottomTail{j.at("v_B").get<double>(), j.at("v_min").get<double>(),
                          j.at("v_clipB").get<double>()};
  t.reflect = j.value("reflect", 0.0);
  return t;
}

IntensityLut lut_from_json(const json& j) {
  const auto& d = j.at("domain");
  return IntensityLut(params_from_json(j.at("params")), tails_from_json(j.at("tails")),
                      Interval{d.at(0).get<double>(), d.at(1).get<double>()});
}

}  // namespace cdfh
