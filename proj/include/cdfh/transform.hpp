#pragma once

#include <optional>

#include <nlohmann/json.hpp>

#include "cdfh/volume.hpp"

namespace cdfh {

inline constexpr double kDefaultRatioCap = 20.0;
/// Number of points the composed map is checked on for monotonicity.
inline constexpr std::size_t kMonotoneCheckPoints = 4096;

/// Intensities (v_B, v_M, v_T) mapped onto the erf arguments (-2, 0, 2).
struct PivotTriple {
  double bottom = 0.0;
  double middle = 0.0;
  double top = 0.0;

  bool valid() const noexcept { return bottom < middle && middle < top; }
  bool operator==(const PivotTriple&) const = default;
};

/// Parameters of the smooth dual-scaling map
///   m(x) = (x - middle) * sigma(x) + shift,
///   sigma(x) = blend(x) * sigma_bottom + (1 - blend(x)) * sigma_top.
struct DualScaleParams {
  double sigma_bottom = 1.0;
  double sigma_top = 1.0;
  double shift = 0.0;
  PivotTriple pivots;

  /// Throws InvalidArgument when sigmas are non-positive, the pivots are not
  /// strictly ordered, or max/min sigma exceeds ratio_cap.
  void validate(double ratio_cap = kDefaultRatioCap) const;
  bool operator==(const DualScaleParams&) const = default;
};

struct TopTail {
  double start = 0.0;  // v_T: where the upper tail begins
  double max = 0.0;    // v_max: highest intensity that reaches the tail
  double clip = 0.0;   // v_clipT
  bool operator==(const TopTail&) const = default;
};

struct BottomTail {
  double start = 0.0;  // v_B
  double min = 0.0;    // v_min
  double clip = 0.0;   // v_clipB
  bool operator==(const BottomTail&) const = default;
};

/// Tail shrinking applied after dual scaling. Disabled sides are nullopt.
struct TailSpec {
  std::optional<TopTail> top;
  std::optional<BottomTail> bottom;
  /// Reflection constant used by the bottom tail (v_max of the mirrored image).
  double reflect = 0.0;

  void validate() const;
  bool operator==(const TailSpec&) const = default;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Interval&) const = default;
};

/// Sigmoidal blending weight in (0, 1); 0.5 at pivots.middle, strictly decreasing.
double blend(double x, const PivotTriple& pivots);
double sigma_blend(double x, const DualScaleParams& params);
double lut_ds(double x, const DualScaleParams& params);

/// v_T + r_T * erf(2 (x - v_T) / r_S) for x >= v_T, identity below, with
/// r_S = v_max - v_T and r_T = v_clipT - v_T.
double lut_top_tail(double x, double v_T, double v_max, double v_clipT);

/// Bottom-tail counterpart obtained by mirroring through v_max:
///   LUT_B(x) = v_max - LUT_T(v_max - x; v_max - v_B, v_max - v_min, v_max - v_clipB).
/// Evaluated in the algebraically reduced form
///   v_B - (v_B - v_clipB) * erf(2 (v_B - x) / (v_B - v_min)),
/// which is exact at x = v_B and independent of v_max.
double lut_bottom_tail(double x, double v_B, double v_min, double v_clipB, double v_max);

/// Composed monotone intensity map: clamp to domain, dual scaling, tail
/// shrinking, then a hard clamp into the clip range of the enabled tails.
class IntensityLut {
 public:
  /// Validates params and tails and verifies monotonicity on a dense grid.
  /// Throws NonMonotone or BadTailSpec instead of returning a bad map.
  IntensityLut(DualScaleParams params, TailSpec tails, Interval domain,
               double ratio_cap = kDefaultRatioCap);

  double operator()(double x) const noexcept;

  const DualScaleParams& params() const noexcept { return params_; }
  const TailSpec& tails() const noexcept { return tails_; }
  const Interval& domain() const noexcept { return domain_; }
  /// Final clamp applied after the tails; nullopt when no tail is enabled.
  const std::optional<Interval>& hard_clamp() const noexcept { return clamp_; }

 private:
  DualScaleParams params_;
  TailSpec tails_;
  Interval domain_;
  std::optional<Interval> clamp_;
};

inline IntensityLut compose_lut(const DualScaleParams& params, const TailSpec& tails,
                                Interval domain, double ratio_cap = kDefaultRatioCap) {
  return IntensityLut(params, tails, domain, ratio_cap);
}

/// Voxel-wise application (OpenMP). Background voxels are copied unchanged
/// when preserve_background is set.
Volume apply_lut(const Volume& vol, const IntensityLut& lut, bool preserve_background = true);
/// Single-threaded reference of apply_lut.
Volume apply_lut_serial(const Volume& vol, const IntensityLut& lut,
                        bool preserve_background = true);

nlohmann::json to_json(const PivotTriple& p);
nlohmann::json to_json(const DualScaleParams& p);
nlohmann::json to_json(const TailSpec& t);
nlohmann::json to_json(const IntensityLut& lut);
PivotTriple pivots_from_json(const nlohmann::json& j);
DualScaleParams params_from_json(const nlohmann::json& j);
TailSpec tails_from_json(const nlohmann::json& j);
IntensityLut lut_from_json(const nlohmann::json& j);

}  // namespace cdfh
