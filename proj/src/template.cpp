#include "cdfh/template.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "cdfh/error.hpp"
#include "cdfh/hash.hpp"

namespace cdfh {

namespace {

TailSpec template_tails(const ControlPoints& controls, const Interval& clip, double lo, double hi) {
  if (!(clip.lo < controls.bottom.t && controls.top.t < clip.hi))
    throw Error(ErrorCode::BadTailSpec, "clip range must enclose the control intensities");
  TailSpec t;
  if (hi > controls.top.t) t.top = TopTail{controls.top.t, hi, clip.hi};
  if (lo < controls.bottom.t) t.bottom = BottomTail{controls.bottom.t, lo, clip.lo};
  t.reflect = hi;
  return t;
}

}  // namespace

TemplateCdf build_template(std::span<const Volume> cohort, const ControlPoints& controls,
                           std::optional<Interval> clip, const FitConfig& config,
                           std::size_t grid_size, std::optional<std::string> channel) {
  if (cohort.empty()) throw Error(ErrorCode::EmptyCohort, "template cohort is empty");
  controls.validate();
  config.validate();

  std::vector<std::optional<EmpiricalCdf>> slots(cohort.size());
  std::vector<std::string> failures(cohort.size());
  const auto n = static_cast<std::int64_t>(cohort.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      slots[k] = build_cdf(zscore_standardize(cohort[k]), Background::Exclude, grid_size);
    } catch (const std::exception& e) {
      failures[k] = e.what();
    }
  }
  std::vector<EmpiricalCdf> cdfs;
  cdfs.reserve(cohort.size());
  for (std::size_t k = 0; k < cohort.size(); ++k) {
    // Re-run serially so the original exception type and code propagate.
    if (!slots[k]) build_cdf(zscore_standardize(cohort[k]), Background::Exclude, grid_size);
    cdfs.push_back(std::move(*slots[k]));
  }

  const EmpiricalCdf avg = average_cdfs(cdfs, grid_size);
  const FitResult fit = fit_template_to_controls(avg, controls, config);

  // Move the averaged curve along x: dual scaling, then the tails.
  std::vector<double> mapped(avg.size());
  for (std::size_t i = 0; i < avg.size(); ++i) mapped[i] = lut_ds(avg.xs()[i], fit.params);
  TailSpec tails;
  if (clip) tails = template_tails(controls, *clip, mapped.front(), mapped.back());
  const IntensityLut lut(fit.params, tails, Interval{avg.lo(), avg.hi()}, config.ratio_cap);

  std::vector<double> xs;
  std::vector<double> ps;
  xs.reserve(avg.size());
  ps.reserve(avg.size());
  for (std::size_t i = 0; i < avg.size(); ++i) {
    const double x = lut(avg.xs()[i]);
    if (!xs.empty() && !(x > xs.back())) {
      // Collapsed by saturation: keep the larger probability at that intensity.
      ps.back() = std::max(ps.back(), avg.ps()[i]);
      continue;
    }
    xs.push_back(x);
    ps.push_back(avg.ps()[i]);
  }

  nlohmann::json cfg = {{"controls", to_json(controls)},
                        {"clip", clip ? nlohmann::json{clip->lo, clip->hi} : nlohmann::json(nullptr)},
                        {"fit", to_json(config)},
                        {"grid_size", grid_size}};

  TemplateCdf t{EmpiricalCdf(std::move(xs), std::move(ps), avg.n_samples()),
                controls,
                clip,
                channel ? *channel : cohort.front().channel(),
                TemplateProvenance{cohort.size(), fnv1a_hex(cfg.dump()), fit}};

  const double tol = 0.005 * controls.span();
  for (const auto& cp : {controls.bottom, controls.middle, controls.top})
    if (std::abs(t.cdf.quantile(cp.p) - cp.t) > tol)
      throw Error(ErrorCode::Infeasible, "template misses a control point by more than 0.5% of span");
  return t;
}

using nlohmann::json;

json to_json(const TemplateCdf& t) {
  json j;
  j["version"] = kTemplateSchemaVersion;
  j["channel"] = t.channel;
  j["controls"] = to_json(t.controls);
  j["clip"] = t.clip ? json{t.clip->lo, t.clip->hi} : json(nullptr);
  j["cdf"] = {{"xs", std::vector<double>(t.cdf.xs().begin(), t.cdf.xs().end())},
              {"ps", std::vector<double>(t.cdf.ps().begin(), t.cdf.ps().end())},
              {"n_samples", t.cdf.n_samples()}};
  j["provenance"] = {{"cohort_size", t.provenance.cohort_size},
                     {"config_hash", t.provenance.config_hash},
                     {"control_fit", to_json(t.provenance.control_fit)}};
  return j;
}

TemplateCdf template_from_json(const json& j) {
  try {
    if (!j.contains("version") || j.at("version").get<int>() != kTemplateSchemaVersion)
      throw Error(ErrorCode::SchemaMismatch, "unsupported template version");
    std::optional<Interval> clip;
    if (!j.at("clip").is_null())
      clip = Interval{j.at("clip").at(0).get<double>(), j.at("clip").at(1).get<double>()};
    const auto& c = j.at("cdf");
    const auto& pv = j.at("provenance");
    return TemplateCdf{EmpiricalCdf(c.at("xs").get<std::vector<double>>(),
                                    c.at("ps").get<std::vector<double>>(),
                                    c.at("n_samples").get<std::size_t>()),
                       controls_from_json(j.at("controls")),
                       clip,
                       j.at("channel").get<std::string>(),
                       TemplateProvenance{pv.at("cohort_size").get<std::size_t>(),
                                          pv.at("config_hash").get<std::string>(),
                                          fit_result_from_json(pv.at("control_fit"))}};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("malformed template: ") + e.what());
  }
}

void save_template(const TemplateCdf& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  out << to_json(t).dump(1) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

TemplateCdf load_template(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("template is not valid JSON: ") + e.what());
  }
  return template_from_json(j);
}

}  // namespace cdfh
