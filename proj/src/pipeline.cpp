#include "cdfh/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "cdfh/error.hpp"
#include "cdfh/hash.hpp"
#include "cdfh/kernels.hpp"
#include "cdfh/plot.hpp"

namespace cdfh {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

TailSpec harmonize_tails(const TemplateCdf& tmpl, const DualScaleParams& params, Interval domain) {
  TailSpec tails;
  const Interval& clip = *tmpl.clip;
  const double top = lut_ds(domain.hi, params);
  const double bottom = lut_ds(domain.lo, params);
  // A side is shrunk only when the dual-scaled range actually leaves the clip.
  if (top > clip.hi) tails.top = TopTail{tmpl.controls.top.t, top, clip.hi};
  if (bottom < clip.lo)
    tails.bottom = BottomTail{tmpl.controls.bottom.t, bottom, clip.lo};
  tails.reflect = top;
  return tails;
}

void quantize(std::vector<double>& v, double bg, bool preserve_background, int bits) {
  if (bits < 1 || bits > 32) throw Error(ErrorCode::InvalidArgument, "bits must lie in [1, 32]");
  const double hi = std::ldexp(1.0, bits) - 1.0;
  // Keep foreground off the reserved background value.
  const double lo = (preserve_background && bg == 0.0) ? 1.0 : 0.0;
  kernels::map_omp(v, v, [=](double x) {
    if (preserve_background && x == bg) return x;
    return std::clamp(std::nearbyint(x), lo, hi);
  });
}

}  // namespace

Harmonized harmonize(const Volume& vol, const TemplateCdf& tmpl, const HarmonizeOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  const EmpiricalCdf cdf = build_cdf(vol, Background::Exclude, options.grid_size);

  FitResult fit;
  if (options.frozen) {
    fit.params = *options.frozen;
    FitConfig l2 = options.fit;
    l2.loss = Loss::L2Quantile;
    const double span = tmpl.cdf.quantile(tmpl.controls.top.p) - tmpl.cdf.quantile(tmpl.controls.bottom.p);
    fit.residual = std::sqrt(fit_objective(cdf, tmpl.cdf, tmpl.controls, l2, fit.params)) * span;
    fit.converged = true;
  } else {
    fit = fit_cdf(cdf, tmpl, options.fit);
  }

  const Interval domain{cdf.lo(), cdf.hi()};
  TailSpec tails;
  if (options.clip && tmpl.clip) tails = harmonize_tails(tmpl, fit.params, domain);
  const IntensityLut lut(fit.params, tails, domain, options.fit.ratio_cap);

  Volume out = apply_lut(vol, lut, options.preserve_background);
  if (options.bits) {
    std::vector<double> v(out.voxels().begin(), out.voxels().end());
    quantize(v, vol.background_value(), options.preserve_background, *options.bits);
    out = out.with_voxels(std::move(v));
  }

  ChannelReport entry;
  entry.channel = vol.channel();
  entry.fit = fit;
  entry.ks_pre = ks_distance(cdf, tmpl.cdf);
  entry.ks_post = ks_distance(build_cdf(out, Background::Exclude, options.grid_size), tmpl.cdf);
  entry.lut = to_json(lut);
  entry.wall_ms = elapsed_ms(t0);
  return {std::move(out), std::move(entry)};
}

ExamResult harmonize_exam(const HarmonizeJob& job) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<const TemplateCdf*> matched;
  for (const auto& v : job.inputs) {
    const auto it = std::find_if(job.templates.begin(), job.templates.end(),
                                 [&](const TemplateCdf& t) { return t.channel == v.channel(); });
    if (it == job.templates.end())
      throw Error(ErrorCode::ChannelMismatch, "no template for channel '" + v.channel() + "'");
    matched.push_back(&*it);
  }
  ExamResult r;
  r.report.config = to_json(job.options);
  r.report.config_hash = fnv1a_hex(r.report.config.dump());
  for (std::size_t i = 0; i < job.inputs.size(); ++i) {
    auto h = harmonize(job.inputs[i], *matched[i], job.options);
    h.entry.name = job.inputs[i].channel();
    r.volumes.push_back(std::move(h.volume));
    r.report.entries.push_back(std::move(h.entry));
  }
  r.report.wall_ms = elapsed_ms(t0);
  return r;
}

std::vector<BatchItem> harmonize_batch(std::span<const Volume> volumes, const TemplateCdf& tmpl,
                                       const HarmonizeOptions& options, int workers) {
  std::vector<BatchItem> items(volumes.size());
  const auto n = static_cast<std::int64_t>(volumes.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, workers))
  for (std::int64_t i = 0; i < n; ++i) {
    auto& item = items[static_cast<std::size_t>(i)];
    try {
      item.result = harmonize(volumes[static_cast<std::size_t>(i)], tmpl, options);
    } catch (const std::exception& e) {
      item.error = e.what();
    }
  }
  return items;
}

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::PercentileStretch: return "stretch";
    case Method::ZScore: return "zscore";
    case Method::CdfMatch: return "cdf";
  }
  return "?";
}

Method method_from_string(std::string_view s) {
  if (s == "stretch") return Method::PercentileStretch;
  if (s == "zscore") return Method::ZScore;
  if (s == "cdf") return Method::CdfMatch;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + std::string(s) + "'");
}

Volume percentile_stretch(const Volume& vol, Interval range) {
  const EmpiricalCdf cdf = build_cdf(vol, Background::Exclude);
  const double q_lo = cdf.quantile(0.01);
  const double q_hi = cdf.quantile(0.99);
  if (!(q_hi > q_lo)) throw Error(ErrorCode::DegenerateConstant, "percentile range is empty");
  const double scale = (range.hi - range.lo) / (q_hi - q_lo);
  const double bg = vol.background_value();
  std::vector<double> out(vol.size());
  kernels::map_omp(vol.voxels(), out, [=](double x) {
    if (x == bg) return x;
    return std::clamp(range.lo + (x - q_lo) * scale, range.lo, range.hi);
  });
  return vol.with_voxels(std::move(out));
}

std::vector<Volume> apply_method(Method method, std::span<const Volume> volumes,
                                 const TemplateCdf& tmpl, const HarmonizeOptions& options) {
  std::vector<Volume> out;
  out.reserve(volumes.size());
  const Interval range = tmpl.clip ? *tmpl.clip : Interval{tmpl.cdf.lo(), tmpl.cdf.hi()};
  for (const auto& v : volumes) {
    switch (method) {
      case Method::PercentileStretch: out.push_back(percentile_stretch(v, range)); break;
      case Method::ZScore: out.push_back(zscore_standardize(v)); break;
      case Method::CdfMatch: out.push_back(harmonize(v, tmpl, options).volume); break;
    }
  }
  return out;
}

std::vector<MethodMetrics> evaluate_cohort(std::span<const Volume> volumes,
                                           const TemplateCdf& tmpl, const std::set<Method>& methods,
                                           const HarmonizeOptions& options) {
  if (volumes.size() < 2) throw Error(ErrorCode::InvalidArgument, "evaluation needs >= 2 volumes");
  std::vector<MethodMetrics> rows;
  for (Method m : methods) {
    const auto outputs = apply_method(m, volumes, tmpl, options);
    std::vector<EmpiricalCdf> cdfs;
    for (const auto& v : outputs) cdfs.push_back(build_cdf(v, Background::Exclude, options.grid_size));

    MethodMetrics row;
    row.method = m;
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < cdfs.size(); ++i)
      for (std::size_t j = i + 1; j < cdfs.size(); ++j, ++pairs) sum += ks_distance(cdfs[i], cdfs[j]);
    row.mean_pairwise_ks = sum / static_cast<double>(pairs);

    double util = 0.0;
    for (const auto& c : cdfs) util += (c.quantile(0.99) - c.quantile(0.01)) / (c.hi() - c.lo());
    row.range_utilization = util / static_cast<double>(cdfs.size());

    if (m == Method::CdfMatch) {
      double k = 0.0;
      for (const auto& c : cdfs) k += ks_distance(c, tmpl.cdf);
      row.mean_ks_to_template = k / static_cast<double>(cdfs.size());
    }
    rows.push_back(row);
  }
  return rows;
}

std::string metrics_csv(std::span<const MethodMetrics> rows) {
  std::string s = "method,mean_pairwise_ks,mean_ks_to_template,range_utilization\n";
  char buf[160];
  for (const auto& r : rows) {
    const std::string to_t =
        r.mean_ks_to_template ? [&] {
          char b[40];
          std::snprintf(b, sizeof b, "%.17g", *r.mean_ks_to_template);
          return std::string(b);
        }()
                              : std::string();
    std::snprintf(buf, sizeof buf, "%s,%.17g,%s,%.17g\n", std::string(to_string(r.method)).c_str(),
                  r.mean_pairwise_ks, to_t.c_str(), r.range_utilization);
    s += buf;
  }
  return s;
}

void emit_harmonization_panels(std::span<const Volume> raw, const TemplateCdf& tmpl,
                               std::span<const Volume> harmonized,
                               const std::filesystem::path& dir, std::size_t grid_size) {
  if (raw.empty() || harmonized.empty()) throw Error(ErrorCode::EmptyInput, "nothing to plot");
  std::filesystem::create_directories(dir);
  auto label = [](const std::string& prefix, std::size_t i) {
    char b[32];
    std::snprintf(b, sizeof b, "%s%02zu", prefix.c_str(), i);
    return std::string(b);
  };

  std::vector<LabeledCdf> raw_c, z_c, harm_c;
  std::vector<EmpiricalCdf> z_only;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw_c.push_back({label("raw", i), build_cdf(raw[i], Background::Exclude, grid_size)});
    z_only.push_back(build_cdf(zscore_standardize(raw[i]), Background::Exclude, grid_size));
    z_c.push_back({label("z", i), z_only.back()});
  }
  for (std::size_t i = 0; i < harmonized.size(); ++i)
    harm_c.push_back({label("out", i), build_cdf(harmonized[i], Background::Exclude, grid_size)});
  harm_c.push_back({"template", tmpl.cdf});

  // Average of the z-scored curves moved by the template's control fit.
  const EmpiricalCdf avg = average_cdfs(z_only, grid_size);
  std::vector<double> xs, ps;
  for (std::size_t i = 0; i < avg.size(); ++i) {
    const double x = lut_ds(avg.xs()[i], tmpl.provenance.control_fit.params);
    if (!xs.empty() && !(x > xs.back())) continue;
    xs.push_back(x);
    ps.push_back(avg.ps()[i]);
  }
  ps.back() = 1.0;
  std::vector<LabeledCdf> t_c{{"template", tmpl.cdf}, {"average (scaled)", EmpiricalCdf(xs, ps)}};

  PlotStyle st;
  st.title = "raw CDFs";
  emit_cdf_plot(raw_c, dir / "raw_cdfs.svg", st);
  st.title = "z-scored CDFs";
  emit_cdf_plot(z_c, dir / "zscored_cdfs.svg", st);
  st.title = "template CDF";
  st.markers = {{tmpl.controls.bottom.t, tmpl.controls.bottom.p},
                {tmpl.controls.middle.t, tmpl.controls.middle.p},
                {tmpl.controls.top.t, tmpl.controls.top.p}};
  emit_cdf_plot(t_c, dir / "template_cdf.svg", st);
  st.title = "harmonized CDFs";
  st.markers.clear();
  emit_cdf_plot(harm_c, dir / "harmonized_cdfs.svg", st);
}

using nlohmann::json;

json to_json(const ChannelReport& r, bool include_timing) {
  json j = {{"name", r.name},         {"channel", r.channel}, {"fit", to_json(r.fit)},
            {"ks_pre", r.ks_pre},     {"ks_post", r.ks_post}, {"lut", r.lut}};
  if (include_timing) j["wall_ms"] = r.wall_ms;
  return j;
}

json to_json(const HarmonizeReport& r, bool include_timing) {
  json entries = json::array();
  for (const auto& e : r.entries) entries.push_back(to_json(e, include_timing));
  json j = {{"entries", entries}, {"config", r.config}, {"config_hash", r.config_hash}};
  if (include_timing) j["wall_ms"] = r.wall_ms;
  return j;
}

json to_json(const HarmonizeOptions& o) {
  return {{"preserve_background", o.preserve_background},
          {"clip", o.clip},
          {"bits", o.bits ? json(*o.bits) : json(nullptr)},
          {"grid_size", o.grid_size},
          {"fit", to_json(o.fit)},
          {"frozen", o.frozen ? to_json(*o.frozen) : json(nullptr)}};
}

}  // namespace cdfh
