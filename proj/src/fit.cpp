#include "cdfh/fit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "cdfh/error.hpp"

namespace cdfh {

void ControlPoints::validate() const {
  if (!(0.0 < bottom.p && bottom.p < middle.p && middle.p < top.p && top.p <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "control percentiles must satisfy 0 < p_B < p_M < p_T <= 1");
  if (!(bottom.t < middle.t && middle.t < top.t))
    throw Error(ErrorCode::InvalidArgument, "control intensities must satisfy t_B < t_M < t_T");
}

std::vector<double> FitConfig::default_percentile_grid() {
  std::vector<double> g(99);
  for (int i = 0; i < 99; ++i) g[static_cast<std::size_t>(i)] = (i + 1) / 100.0;
  return g;
}

void FitConfig::validate() const {
  if (percentile_grid.size() < 3)
    throw Error(ErrorCode::InvalidArgument, "percentile grid needs at least 3 points");
  for (std::size_t i = 0; i < percentile_grid.size(); ++i) {
    const double p = percentile_grid[i];
    if (!(p > 0.0 && p < 1.0) || (i > 0 && !(p > percentile_grid[i - 1])))
      throw Error(ErrorCode::InvalidArgument, "percentile grid must be strictly increasing in (0,1)");
  }
  if (!(sigma_lo > 0.0 && sigma_lo < sigma_hi))
    throw Error(ErrorCode::InvalidArgument, "sigma bounds must satisfy 0 < lo < hi");
  if (!(ratio_cap >= 1.0)) throw Error(ErrorCode::InvalidArgument, "ratio cap must be >= 1");
  if (max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be positive");
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tol must be positive");
  if (!(huber_delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "huber delta must be positive");
}

PivotTriple image_pivots(const EmpiricalCdf& image, const ControlPoints& controls) {
  PivotTriple k{image.quantile(controls.bottom.p), image.quantile(controls.middle.p),
                image.quantile(controls.top.p)};
  if (!k.valid())
    throw Error(ErrorCode::DegenerateCdf, "image quantiles at control percentiles are not distinct");
  return k;
}

namespace {

// Precomputed quantile pairs plus the normalization shared by every
// objective evaluation of one fit.
struct Problem {
  std::vector<double> source;  // Q_image(p_j)
  std::vector<double> target;  // Q_target(p_j)
  PivotTriple pivots;
  double span = 1.0;       // target control span, normalizes residuals and gamma
  double t_mid = 0.0;      // target median anchor
  double uniform = 1.0;    // uniform-scaling slope; sigma bounds are relative to it
  Loss loss = Loss::L2Quantile;
  double delta = 0.01;

  double rho(double r) const {
    if (loss == Loss::L2Quantile) return r * r;
    const double a = std::abs(r);
    return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
  }

  double objective(const DualScaleParams& prm) const {
    double s = 0.0;
    for (std::size_t j = 0; j < source.size(); ++j)
      s += rho((lut_ds(source[j], prm) - target[j]) / span);
    return s / static_cast<double>(source.size());
  }

  double rms(const DualScaleParams& prm) const {
    double s = 0.0;
    for (std::size_t j = 0; j < source.size(); ++j) {
      const double r = lut_ds(source[j], prm) - target[j];
      s += r * r;
    }
    return std::sqrt(s / static_cast<double>(source.size()));
  }
};

Problem make_problem(const EmpiricalCdf& image, const EmpiricalCdf& target,
                     const ControlPoints& controls, const FitConfig& config) {
  controls.validate();
  config.validate();
  Problem pr;
  pr.pivots = image_pivots(image, controls);
  const double tb = target.quantile(controls.bottom.p);
  const double tm = target.quantile(controls.middle.p);
  const double tt = target.quantile(controls.top.p);
  if (!(tb < tm && tm < tt))
    throw Error(ErrorCode::DegenerateCdf, "target quantiles at control percentiles are not distinct");
  pr.span = tt - tb;
  pr.t_mid = tm;
  pr.uniform = (tt - tb) / (pr.pivots.top - pr.pivots.bottom);
  pr.loss = config.loss;
  pr.delta = config.huber_delta;
  pr.source.reserve(config.percentile_grid.size());
  pr.target.reserve(config.percentile_grid.size());
  for (double p : config.percentile_grid) {
    pr.source.push_back(image.quantile(p));
    pr.target.push_back(target.quantile(p));
  }
  return pr;
}

using Point = std::array<double, 3>;  // log sigma_B, log sigma_T, (gamma - t_mid) / span

struct Box {
  double log_lo, log_hi, log_ratio;

  Point project(Point x) const {
    x[0] = std::clamp(x[0], log_lo, log_hi);
    x[1] = std::clamp(x[1], log_lo, log_hi);
    if (std::abs(x[0] - x[1]) > log_ratio) {
      const double mid = 0.5 * (x[0] + x[1]);
      const double half = 0.5 * log_ratio;
      if (x[0] > x[1]) {
        x[0] = mid + half;
        x[1] = mid - half;
      } else {
        x[0] = mid - half;
        x[1] = mid + half;
      }
      x[0] = std::clamp(x[0], log_lo, log_hi);
      x[1] = std::clamp(x[1], log_lo, log_hi);
    }
    return x;
  }
};

DualScaleParams decode(const Point& x, const Problem& pr) {
  return {std::exp(x[0]), std::exp(x[1]), pr.t_mid + x[2] * pr.span, pr.pivots};
}

Point encode(const DualScaleParams& p, const Problem& pr) {
  return {std::log(p.sigma_bottom), std::log(p.sigma_top), (p.shift - pr.t_mid) / pr.span};
}

struct Simplex {
  std::array<Point, 4> x;
  std::array<double, 4> f;

  void order() {
    std::array<int, 4> idx{0, 1, 2, 3};
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return f[a] < f[b]; });
    auto x2 = x;
    auto f2 = f;
    for (int k = 0; k < 4; ++k) {
      x[k] = x2[idx[k]];
      f[k] = f2[idx[k]];
    }
  }
};

struct SearchOutcome {
  Point best;
  double fbest;
  int iterations;
  bool converged;
  Simplex final_simplex;
};

constexpr double kAbsFloor = 1e-20;

// Nelder-Mead with projection onto the feasible box after every move. The
// best vertex value never increases.
SearchOutcome nelder_mead(const Problem& pr, const Box& box, Point start, int max_iters,
                          double tol) {
  auto eval = [&](const Point& p) { return pr.objective(decode(p, pr)); };
  constexpr std::array<double, 3> step{0.1, 0.1, 0.05};

  Simplex s;
  s.x[0] = box.project(start);
  for (int k = 0; k < 3; ++k) {
    Point p = s.x[0];
    p[k] += step[k];
    p = box.project(p);
    if (p == s.x[0]) {
      p[k] -= 2 * step[k];
      p = box.project(p);
    }
    s.x[k + 1] = p;
  }
  for (int k = 0; k < 4; ++k) s.f[k] = eval(s.x[k]);

  int it = 0;
  bool converged = false;
  for (; it < max_iters; ++it) {
    s.order();
    if (s.f[3] - s.f[0] <= tol * std::abs(s.f[0]) + kAbsFloor) {
      converged = true;
      break;
    }
    Point c{0, 0, 0};
    for (int k = 0; k < 3; ++k)
      for (int d = 0; d < 3; ++d) c[d] += s.x[k][d] / 3.0;

    auto along = [&](double t) {
      Point p;
      for (int d = 0; d < 3; ++d) p[d] = c[d] + t * (s.x[3][d] - c[d]);
      return box.project(p);
    };

    const Point xr = along(-1.0);
    const double fr = eval(xr);
    if (fr < s.f[0]) {
      const Point xe = along(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        s.x[3] = xe;
        s.f[3] = fe;
      } else {
        s.x[3] = xr;
        s.f[3] = fr;
      }
      continue;
    }
    if (fr < s.f[2]) {
      s.x[3] = xr;
      s.f[3] = fr;
      continue;
    }
    const bool outside = fr < s.f[3];
    const Point xc = along(outside ? -0.5 : 0.5);
    const double fc = eval(xc);
    if (fc < (outside ? fr : s.f[3])) {
      s.x[3] = xc;
      s.f[3] = fc;
      continue;
    }
    for (int k = 1; k < 4; ++k) {
      for (int d = 0; d < 3; ++d) s.x[k][d] = s.x[0][d] + 0.5 * (s.x[k][d] - s.x[0][d]);
      s.x[k] = box.project(s.x[k]);
      s.f[k] = eval(s.x[k]);
    }
  }
  s.order();
  return {s.x[0], s.f[0], it, converged, s};
}

}  // namespace

double fit_objective(const EmpiricalCdf& image, const EmpiricalCdf& target,
                     const ControlPoints& controls, const FitConfig& config,
                     const DualScaleParams& params) {
  return make_problem(image, target, controls, config).objective(params);
}

DualScaleParams uniform_guess(const EmpiricalCdf& image, const EmpiricalCdf& target,
                              const ControlPoints& controls) {
  const auto pivots = image_pivots(image, controls);
  const double tb = target.quantile(controls.bottom.p);
  const double tm = target.quantile(controls.middle.p);
  const double tt = target.quantile(controls.top.p);
  const double s = (tt - tb) / (pivots.top - pivots.bottom);
  return {s, s, tm, pivots};
}

FitResult fit_cdf(const EmpiricalCdf& image, const EmpiricalCdf& target,
                  const ControlPoints& controls, const FitConfig& config) {
  const Problem pr = make_problem(image, target, controls, config);
  const Box box{std::log(config.sigma_lo * pr.uniform), std::log(config.sigma_hi * pr.uniform),
                std::log(config.ratio_cap)};

  // Two starts: matched B->M and M->T spans, and a single uniform slope.
  const double tb = target.quantile(controls.bottom.p);
  const double tt = target.quantile(controls.top.p);
  const DualScaleParams two_point{(pr.t_mid - tb) / (pr.pivots.middle - pr.pivots.bottom),
                                  (tt - pr.t_mid) / (pr.pivots.top - pr.pivots.middle), pr.t_mid,
                                  pr.pivots};
  const DualScaleParams uniform{pr.uniform, pr.uniform, pr.t_mid, pr.pivots};
  Point start = box.project(encode(two_point, pr));
  const Point start_u = box.project(encode(uniform, pr));
  if (pr.objective(decode(start_u, pr)) < pr.objective(decode(start, pr))) start = start_u;

  int used = 0;
  bool converged = false;
  SearchOutcome out{};
  double previous = std::numeric_limits<double>::infinity();
  // Restart from the incumbent until a restart no longer improves it; a
  // collapsed simplex can otherwise stall short of the minimum.
  while (used < config.max_iters) {
    out = nelder_mead(pr, box, start, config.max_iters - used, config.tol);
    used += out.iterations;
    if (!out.converged) break;
    if (previous - out.fbest <= config.tol * std::abs(out.fbest) + kAbsFloor) {
      converged = true;
      break;
    }
    previous = out.fbest;
    start = out.best;
  }

  // Flat objective: among equally good vertices prefer the one nearest identity.
  Point best = out.best;
  auto dist = [&](const Point& p) {
    return p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
  };
  for (int k = 1; k < 4; ++k)
    if (out.final_simplex.f[k] == out.fbest && dist(out.final_simplex.x[k]) < dist(best))
      best = out.final_simplex.x[k];

  FitResult r;
  r.params = decode(best, pr);
  r.residual = pr.rms(r.params);
  r.iterations = used;
  r.converged = converged;
  return r;
}

FitResult fit_template_to_controls(const EmpiricalCdf& avg, const ControlPoints& controls,
                                   const FitConfig& config) {
  controls.validate();
  config.validate();
  const PivotTriple k = image_pivots(avg, controls);

  // lut_ds(v) = (v - v_M) (sigma_T + b(v) (sigma_B - sigma_T)) + t_M is linear
  // in (sigma_B, sigma_T) for fixed v:
  //   b_B sigma_B + (1 - b_B) sigma_T = a,  b_T sigma_B + (1 - b_T) sigma_T = c.
  const double b_lo = blend(k.bottom, k);
  const double b_hi = blend(k.top, k);
  const double a = (controls.bottom.t - controls.middle.t) / (k.bottom - k.middle);
  const double c = (controls.top.t - controls.middle.t) / (k.top - k.middle);
  const double det = b_lo - b_hi;
  const double sigma_b = (a * (1.0 - b_hi) - c * (1.0 - b_lo)) / det;
  const double sigma_t = (c * b_lo - a * b_hi) / det;

  const double uniform = controls.span() / (k.top - k.bottom);
  const double lo = config.sigma_lo * uniform;
  const double hi = config.sigma_hi * uniform;
  if (!(sigma_b > 0.0 && sigma_t > 0.0))
    throw Error(ErrorCode::Infeasible, "control points need a non-positive scale factor");
  if (sigma_b < lo || sigma_b > hi || sigma_t < lo || sigma_t > hi)
    throw Error(ErrorCode::Infeasible, "control points need scale factors outside the bounds");
  if (std::max(sigma_b, sigma_t) / std::min(sigma_b, sigma_t) > config.ratio_cap)
    throw Error(ErrorCode::Infeasible, "control points need a scale ratio above the cap");

  FitResult r;
  r.params = {sigma_b, sigma_t, controls.middle.t, k};
  const std::array<double, 3> err{lut_ds(k.bottom, r.params) - controls.bottom.t,
                                  lut_ds(k.middle, r.params) - controls.middle.t,
                                  lut_ds(k.top, r.params) - controls.top.t};
  r.residual = std::sqrt((err[0] * err[0] + err[1] * err[1] + err[2] * err[2]) / 3.0);
  r.iterations = 0;
  r.converged = true;
  return r;
}

using nlohmann::json;

namespace {
json point_json(const ControlPoint& c) { return {{"p", c.p}, {"t", c.t}}; }
ControlPoint point_from(const json& j) { return {j.at("p").get<double>(), j.at("t").get<double>()}; }
}  // namespace

json to_json(const ControlPoints& c) {
  return {{"pi_B", point_json(c.bottom)}, {"pi_M", point_json(c.middle)}, {"pi_T", point_json(c.top)}};
}

ControlPoints controls_from_json(const json& j) {
  ControlPoints c{point_from(j.at("pi_B")), point_from(j.at("pi_M")), point_from(j.at("pi_T"))};
  c.validate();
  return c;
}

json to_json(const FitConfig& c) {
  return {{"percentile_grid", c.percentile_grid},
          {"sigma_bounds", {c.sigma_lo, c.sigma_hi}},
          {"ratio_cap", c.ratio_cap},
          {"max_iters", c.max_iters},
          {"tol", c.tol},
          {"loss", c.loss == Loss::L2Quantile ? "L2_QUANTILE" : "HUBER_QUANTILE"},
          {"huber_delta", c.huber_delta}};
}

FitConfig fit_config_from_json(const json& j, FitConfig c) {
  if (j.contains("percentile_grid")) c.percentile_grid = j.at("percentile_grid").get<std::vector<double>>();
  if (j.contains("sigma_bounds")) {
    c.sigma_lo = j.at("sigma_bounds").at(0).get<double>();
    c.sigma_hi = j.at("sigma_bounds").at(1).get<double>();
  }
  if (j.contains("ratio_cap")) c.ratio_cap = j.at("ratio_cap").get<double>();
  if (j.contains("max_iters")) c.max_iters = j.at("max_iters").get<int>();
  if (j.contains("tol")) c.tol = j.at("tol").get<double>();
  if (j.contains("loss")) {
    const auto s = j.at("loss").get<std::string>();
    if (s == "L2_QUANTILE") c.loss = Loss::L2Quantile;
    else if (s == "HUBER_QUANTILE") c.loss = Loss::HuberQuantile;
    else throw Error(ErrorCode::InvalidArgument, "unknown loss " + s);
  }
  if (j.contains("huber_delta")) c.huber_delta = j.at("huber_delta").get<double>();
  c.validate();
  return c;
}

json to_json(const FitResult& r) {
  return {{"params", to_json(r.params)},
          {"residual", r.residual},
          {"iterations", r.iterations},
          {"converged", r.converged}};
}

FitResult fit_result_from_json(const json& j) {
  FitResult r;
  r.params = params_from_json(j.at("params"));
  r.residual = j.at("residual").get<double>();
  r.iterations = j.at("iterations").get<int>();
  r.converged = j.at("converged").get<bool>();
  return r;
}

}  // namespace cdfh
