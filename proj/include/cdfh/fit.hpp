#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "cdfh/cdf.hpp"
#include "cdfh/transform.hpp"

namespace cdfh {

/// (percentile, target intensity) anchor.
struct ControlPoint {
  double p = 0.0;
  double t = 0.0;
  bool operator==(const ControlPoint&) const = default;
};

struct ControlPoints {
  ControlPoint bottom{0.1, 500.0};
  ControlPoint middle{0.5, 1650.0};
  ControlPoint top{0.99, 3300.0};

  /// Requires 0 < p_B < p_M < p_T <= 1 and t_B < t_M < t_T.
  void validate() const;
  double span() const noexcept { return top.t - bottom.t; }
  bool operator==(const ControlPoints&) const = default;
};

enum class Loss { L2Quantile, HuberQuantile };

struct FitConfig {
  std::vector<double> percentile_grid = default_percentile_grid();
  /// Bounds on each scale factor, relative to the uniform-scaling slope
  /// (target B..T span divided by source B..T span).
  double sigma_lo = 0.05;
  double sigma_hi = 20.0;
  double ratio_cap = kDefaultRatioCap;
  int max_iters = 500;
  double tol = 1e-6;
  Loss loss = Loss::L2Quantile;
  /// Huber threshold as a fraction of the target control span.
  double huber_delta = 0.01;

  void validate() const;
  static std::vector<double> default_percentile_grid();  // 0.01, 0.02, ..., 0.99
  bool operator==(const FitConfig&) const = default;
};

struct FitResult {
  DualScaleParams params;
  double residual = 0.0;  // RMS quantile mismatch in target intensity units
  int iterations = 0;
  bool converged = false;
  bool operator==(const FitResult&) const = default;
};

/// Image pivots: the image's own quantiles at the control percentiles.
PivotTriple image_pivots(const EmpiricalCdf& image, const ControlPoints& controls);

/// Finds (sigma_B, sigma_T, gamma) minimizing the quantile-domain loss
///   sum_p rho(lut_ds(Q_image(p)) - Q_target(p))
/// over config.percentile_grid. Hitting max_iters is not an error: the best
/// point is returned with converged == false.
FitResult fit_cdf(const EmpiricalCdf& image, const EmpiricalCdf& target,
                  const ControlPoints& controls, const FitConfig& config = {});

/// Objective value (mean normalized loss) of `params` for the pair; exposed
/// for tests and diagnostics.
double fit_objective(const EmpiricalCdf& image, const EmpiricalCdf& target,
                     const ControlPoints& controls, const FitConfig& config,
                     const DualScaleParams& params);

/// Uniform-scaling starting point: one slope for the whole B..T span,
/// gamma = target median.
DualScaleParams uniform_guess(const EmpiricalCdf& image, const EmpiricalCdf& target,
                              const ControlPoints& controls);

/// Fits lut_ds so that the averaged curve passes through the three control
/// points: gamma = t_M, and (sigma_B, sigma_T) solve the 2x2 linear system
/// given by the bottom and top points. Throws Infeasible when the solution
/// leaves the configured bounds.
FitResult fit_template_to_controls(const EmpiricalCdf& avg, const ControlPoints& controls,
                                   const FitConfig& config = {});

nlohmann::json to_json(const ControlPoints& c);
ControlPoints controls_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FitConfig& c);
FitConfig fit_config_from_json(const nlohmann::json& j, FitConfig base = {});
nlohmann::json to_json(const FitResult& r);
FitResult fit_result_from_json(const nlohmann::json& j);

}  // namespace cdfh
