#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "cdfh/cdf.hpp"
#include "cdfh/fit.hpp"
#include "cdfh/volume.hpp"

namespace cdfh {

inline constexpr int kTemplateSchemaVersion = 1;

struct TemplateProvenance {
  std::size_t cohort_size = 0;
  std::string config_hash;
  FitResult control_fit;  // dual-scaling that moved the averaged curve onto the controls
  bool operator==(const TemplateProvenance&) const = default;
};

/// Target distribution for one channel.
struct TemplateCdf {
  EmpiricalCdf cdf;
  ControlPoints controls;
  std::optional<Interval> clip;
  std::string channel;
  TemplateProvenance provenance;

  bool operator==(const TemplateCdf&) const = default;
};

/// z-score every cohort volume, average their CDFs, fit the average through
/// the control points with lut_ds, and shrink the tails into `clip` when
/// given. The result is independent of cohort order. Channel defaults to the
/// first volume's label.
TemplateCdf build_template(std::span<const Volume> cohort, const ControlPoints& controls,
                           std::optional<Interval> clip, const FitConfig& config = {},
                           std::size_t grid_size = kDefaultGridSize,
                           std::optional<std::string> channel = std::nullopt);

inline FitResult fit_cdf(const EmpiricalCdf& image, const TemplateCdf& tmpl,
                         const FitConfig& config = {}) {
  return fit_cdf(image, tmpl.cdf, tmpl.controls, config);
}

nlohmann::json to_json(const TemplateCdf& t);
/// Throws SchemaMismatch on a version mismatch or malformed document.
TemplateCdf template_from_json(const nlohmann::json& j);
void save_template(const TemplateCdf& t, const std::filesystem::path& path);
TemplateCdf load_template(const std::filesystem::path& path);

}  // namespace cdfh
