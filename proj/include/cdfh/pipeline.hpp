#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdfh/fit.hpp"
#include "cdfh/template.hpp"
#include "cdfh/transform.hpp"
#include "cdfh/volume.hpp"

namespace cdfh {

struct HarmonizeOptions {
  bool preserve_background = true;
  /// Shrink tails into the template clip range (when the template has one).
  bool clip = true;
  /// Round half-to-even into [0, 2^bits - 1] after clipping.
  std::optional<int> bits;
  std::size_t grid_size = kDefaultGridSize;
  FitConfig fit;
  /// Reuse fixed parameters instead of fitting each image.
  std::optional<DualScaleParams> frozen;
};

struct ChannelReport {
  std::string name;  // input identifier (file stem or caller label)
  std::string channel;
  FitResult fit;
  double ks_pre = 0.0;   // image CDF vs template before harmonization
  double ks_post = 0.0;  // harmonized CDF vs template
  nlohmann::json lut;    // pre-quantization map
  double wall_ms = 0.0;  // not serialized by default (artifacts stay deterministic)
};

struct HarmonizeReport {
  std::vector<ChannelReport> entries;
  nlohmann::json config;
  std::string config_hash;
  double wall_ms = 0.0;
};

struct Harmonized {
  Volume volume;
  ChannelReport entry;
};

/// build_cdf -> fit_cdf -> compose_lut -> apply_lut (+ quantization).
Harmonized harmonize(const Volume& vol, const TemplateCdf& tmpl,
                     const HarmonizeOptions& options = {});

struct HarmonizeJob {
  std::vector<Volume> inputs;  // one per channel
  std::vector<TemplateCdf> templates;
  HarmonizeOptions options;
};

struct ExamResult {
  std::vector<Volume> volumes;  // same order as job.inputs
  HarmonizeReport report;
};

/// Each channel against the template with the same label; ChannelMismatch
/// when one is missing.
ExamResult harmonize_exam(const HarmonizeJob& job);

struct BatchItem {
  std::optional<Harmonized> result;
  std::string error;  // set when result is empty
};

/// Whole volumes distributed over `workers` OpenMP threads; results are in
/// input order.
std::vector<BatchItem> harmonize_batch(std::span<const Volume> volumes, const TemplateCdf& tmpl,
                                       const HarmonizeOptions& options, int workers = 1);

enum class Method { PercentileStretch, ZScore, CdfMatch };
std::string_view to_string(Method m) noexcept;
Method method_from_string(std::string_view s);  // "stretch" | "zscore" | "cdf"

/// Affine map of [Q(0.01), Q(0.99)] onto `range`, clamped to it.
Volume percentile_stretch(const Volume& vol, Interval range);

struct MethodMetrics {
  Method method;
  double mean_pairwise_ks = 0.0;
  std::optional<double> mean_ks_to_template;  // CdfMatch only
  /// Mean over volumes of (Q(0.99) - Q(0.01)) / (max - min) of the output.
  double range_utilization = 0.0;
};

/// Harmonizes the cohort with each method and compares the resulting CDFs.
std::vector<MethodMetrics> evaluate_cohort(std::span<const Volume> volumes,
                                           const TemplateCdf& tmpl, const std::set<Method>& methods,
                                           const HarmonizeOptions& options = {});

/// Outputs of one method on a cohort (used by evaluation and plotting).
std::vector<Volume> apply_method(Method method, std::span<const Volume> volumes,
                                 const TemplateCdf& tmpl, const HarmonizeOptions& options);

std::string metrics_csv(std::span<const MethodMetrics> rows);

/// Four panels: raw CDFs, z-scored CDFs, template with its control points and
/// the fitted average curve, harmonized CDFs with the template.
/// Files: raw_cdfs.svg, zscored_cdfs.svg, template_cdf.svg, harmonized_cdfs.svg
/// (each with a .csv companion).
void emit_harmonization_panels(std::span<const Volume> raw, const TemplateCdf& tmpl,
                               std::span<const Volume> harmonized,
                               const std::filesystem::path& dir,
                               std::size_t grid_size = kDefaultGridSize);

nlohmann::json to_json(const ChannelReport& r, bool include_timing = false);
nlohmann::json to_json(const HarmonizeReport& r, bool include_timing = false);
nlohmann::json to_json(const HarmonizeOptions& o);

}  // namespace cdfh
