#include "cdfh/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "cdfh/error.hpp"
#include "cdfh/hash.hpp"
#include "cdfh/io.hpp"
#include "cdfh/pipeline.hpp"
#include "cdfh/plot.hpp"
#include "cdfh/synth.hpp"
#include "cdfh/template.hpp"

namespace cdfh::cli {

namespace fs = std::filesystem;
using nlohmann::json;

json AppConfig::to_json() const {
  return {{"schema", kConfigSchemaVersion},
          {"controls", cdfh::to_json(controls)},
          {"clip", clip ? json{clip->lo, clip->hi} : json(nullptr)},
          {"grid_size", grid_size},
          {"fit", cdfh::to_json(fit)},
          {"workers", workers},
          {"log_level", log_level},
          {"bits", bits ? json(*bits) : json(nullptr)},
          {"preserve_background", preserve_background}};
}

AppConfig AppConfig::from_json(const json& j, AppConfig c) {
  try {
    if (j.contains("schema") && j.at("schema").get<int>() != kConfigSchemaVersion)
      throw Error(ErrorCode::SchemaMismatch, "unsupported config schema");
    if (j.contains("controls")) c.controls = controls_from_json(j.at("controls"));
    if (j.contains("clip")) {
      const auto& v = j.at("clip");
      if (v.is_null())
        c.clip.reset();
      else if (v.is_string())
        c.clip = parse_clip(v.get<std::string>());
      else
        c.clip = Interval{v.at(0).get<double>(), v.at(1).get<double>()};
    }
    if (j.contains("grid_size")) c.grid_size = j.at("grid_size").get<std::size_t>();
    if (j.contains("fit")) c.fit = fit_config_from_json(j.at("fit"), c.fit);
    if (j.contains("workers")) c.workers = j.at("workers").get<int>();
    if (j.contains("log_level")) c.log_level = j.at("log_level").get<std::string>();
    if (j.contains("bits")) {
      if (j.at("bits").is_null())
        c.bits.reset();
      else
        c.bits = j.at("bits").get<int>();
    }
    if (j.contains("preserve_background"))
      c.preserve_background = j.at("preserve_background").get<bool>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad config: ") + e.what());
  }
  return c;
}

std::optional<Interval> parse_clip(const std::string& s) {
  if (s == "none") return std::nullopt;
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw Error(ErrorCode::UsageError, "clip must be lo:hi or none");
  try {
    Interval c{std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
    if (!(c.lo < c.hi)) throw Error(ErrorCode::UsageError, "clip needs lo < hi");
    return c;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::UsageError, "clip must be lo:hi or none");
  }
}

namespace {

class Log {
 public:
  explicit Log(const std::string& level) {
    if (level == "error") level_ = 0;
    else if (level == "warn") level_ = 1;
    else if (level == "info") level_ = 2;
    else if (level == "debug") level_ = 3;
    else throw Error(ErrorCode::UsageError, "unknown log level " + level);
  }
  void error(const std::string& m) const { emit(0, "error", m); }
  void warn(const std::string& m) const { emit(1, "warn", m); }
  void info(const std::string& m) const { emit(2, "info", m); }

 private:
  void emit(int l, const char* tag, const std::string& m) const {
    if (l <= level_) std::cerr << "cdfh " << tag << ": " << m << '\n';
  }
  int level_ = 2;
};

std::vector<fs::path> expand_inputs(const std::vector<std::string>& args) {
  std::vector<fs::path> out;
  for (const auto& a : args) {
    const fs::path p(a);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".raw") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(p);
    }
  }
  if (out.empty()) throw Error(ErrorCode::UsageError, "no input volumes");
  return out;
}

std::vector<Volume> read_all(const std::vector<fs::path>& paths) {
  std::vector<Volume> v;
  v.reserve(paths.size());
  for (const auto& p : paths) v.push_back(read_volume(p));
  return v;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// Raw flag values; "set" tracks which ones the user passed.
struct Flags {
  std::string config_path;
  std::string log_level;
  std::string clip;
  std::string controls_path;
  std::size_t grid = 0;
  int workers = 0;
  int bits = 0;
  bool preserve_background = true;
  bool best_effort = false;
  bool timing = false;
};

AppConfig effective_config(const Flags& f, const CLI::App& root, const CLI::App* sub) {
  AppConfig c;
  if (!f.config_path.empty()) c = AppConfig::from_json(read_json(f.config_path), c);
  auto given = [&](const char* name) {
    if (root.get_option_no_throw(name) && root.get_option_no_throw(name)->count() > 0) return true;
    return sub && sub->get_option_no_throw(name) && sub->get_option_no_throw(name)->count() > 0;
  };
  if (given("--log-level")) c.log_level = f.log_level;
  if (given("--clip")) c.clip = parse_clip(f.clip);
  if (given("--controls")) c.controls = controls_from_json(read_json(f.controls_path));
  if (given("--grid")) c.grid_size = f.grid;
  if (given("--workers")) c.workers = f.workers;
  if (given("--bits")) c.bits = f.bits;
  if (given("--preserve-background")) c.preserve_background = f.preserve_background;
  c.fit.validate();
  c.controls.validate();
  if (c.grid_size < 2) throw Error(ErrorCode::UsageError, "grid size must be >= 2");
  if (c.workers < 1) throw Error(ErrorCode::UsageError, "workers must be >= 1");
  return c;
}

HarmonizeOptions harmonize_options(const AppConfig& c) {
  HarmonizeOptions o;
  o.preserve_background = c.preserve_background;
  o.clip = c.clip.has_value();
  o.bits = c.bits;
  o.grid_size = c.grid_size;
  o.fit = c.fit;
  return o;
}

int cmd_template_build(const AppConfig& cfg, const Log& log, const std::vector<std::string>& inputs,
                       const std::string& channel, const std::string& out) {
  const auto paths = expand_inputs(inputs);
  const auto cohort = read_all(paths);
  const auto t = build_template(cohort, cfg.controls, cfg.clip, cfg.fit, cfg.grid_size,
                                channel.empty() ? std::nullopt : std::optional(channel));
  ensure_parent(out);
  save_template(t, out);
  log.info("template '" + t.channel + "' from " + std::to_string(cohort.size()) + " volumes -> " + out);
  return kOk;
}

int cmd_harmonize(const AppConfig& cfg, const Log& log, const Flags& f,
                  const std::vector<std::string>& template_paths,
                  const std::vector<std::string>& inputs, const std::string& out_dir,
                  const std::string& report_path, const std::string& params_path) {
  std::vector<TemplateCdf> templates;
  for (const auto& p : template_paths) templates.push_back(load_template(p));
  const auto paths = expand_inputs(inputs);
  HarmonizeOptions opts = harmonize_options(cfg);
  if (!params_path.empty()) opts.frozen = params_from_json(read_json(params_path));
  fs::create_directories(out_dir);

  // Group inputs by template so each group runs through the worker pool.
  std::vector<Volume> vols;
  std::vector<std::string> errors(paths.size());
  std::vector<int> which(paths.size(), -1);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    try {
      vols.push_back(read_volume(paths[i]));
    } catch (const std::exception& e) {
      vols.emplace_back(Dims{1, 1, 1}, std::vector<double>{0.0});
      errors[i] = e.what();
      continue;
    }
    for (std::size_t k = 0; k < templates.size(); ++k)
      if (templates[k].channel == vols.back().channel()) which[i] = static_cast<int>(k);
    if (which[i] < 0)
      errors[i] = Error(ErrorCode::ChannelMismatch,
                        "no template for channel '" + vols.back().channel() + "'").what();
  }

  std::vector<std::optional<Harmonized>> results(paths.size());
  for (std::size_t k = 0; k < templates.size(); ++k) {
    std::vector<std::size_t> idx;
    std::vector<Volume> group;
    for (std::size_t i = 0; i < paths.size(); ++i)
      if (which[i] == static_cast<int>(k) && errors[i].empty()) {
        idx.push_back(i);
        group.push_back(vols[i]);
      }
    auto items = harmonize_batch(group, templates[k], opts, cfg.workers);
    for (std::size_t g = 0; g < idx.size(); ++g) {
      if (items[g].result)
        results[idx[g]] = std::move(items[g].result);
      else
        errors[idx[g]] = items[g].error;
    }
  }

  const DType dtype = (cfg.bits && *cfg.bits <= 16) ? DType::U16 : DType::F32;
  json entries = json::array();
  json failures = json::array();
  int failed = 0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const std::string name = paths[i].filename().string();
    if (!results[i]) {
      ++failed;
      log.error(name + ": " + errors[i]);
      failures.push_back({{"name", name}, {"error", errors[i]}});
      continue;
    }
    auto& h = *results[i];
    h.entry.name = name;
    const auto stats = write_volume(h.volume, fs::path(out_dir) / paths[i].filename(), dtype);
    if (stats.clamped) log.warn(name + ": " + std::to_string(stats.clamped) + " voxels clamped on write");
    if (!h.entry.fit.converged) {
      ++failed;
      log.error(name + ": fit did not converge");
      failures.push_back({{"name", name}, {"error", "NoConvergence"}});
    }
    entries.push_back(to_json(h.entry, f.timing));
  }

  const json eff = cfg.to_json();
  json report = {{"tool", "cdfh"},
                 {"version", kVersion},
                 {"config", eff},
                 {"config_hash", fnv1a_hex(eff.dump())},
                 {"entries", entries},
                 {"failures", failures}};
  if (!report_path.empty()) {
    ensure_parent(report_path);
    write_text(report_path, report.dump(1) + "\n");
  }
  log.info("harmonized " + std::to_string(paths.size() - failed) + "/" + std::to_string(paths.size()));
  if (failed == 0) return kOk;
  return f.best_effort ? kPartial : kFailure;
}

int cmd_synth(const Log& log, const std::string& spec_path, const std::optional<std::uint64_t> seed,
              const std::string& out, const std::string& dtype) {
  SynthSpec spec = spec_path.empty() ? SynthSpec{} : synth_spec_from_json(read_json(spec_path));
  if (seed) spec.seed = *seed;
  const auto vol = generate_synthetic(spec);
  ensure_parent(out);
  const auto stats = write_volume(vol, out, dtype_from_string(dtype));
  if (stats.clamped) log.warn(std::to_string(stats.clamped) + " voxels clamped on write");
  log.info("synthetic volume -> " + out);
  return kOk;
}

int cmd_inspect(const AppConfig& cfg, const Log& log, const std::string& cdf_path,
                const std::string& lut_path, const std::string& out, const std::string& plot) {
  if (cdf_path.empty() == lut_path.empty())
    throw Error(ErrorCode::UsageError, "inspect needs exactly one of --cdf or --lut");
  if (!cdf_path.empty()) {
    const auto vol = read_volume(cdf_path);
    const auto cdf = build_cdf(vol, Background::Exclude, cfg.grid_size);
    if (!out.empty()) {
      ensure_parent(out);
      write_cdf_csv(cdf, out);
    }
    if (!plot.empty()) {
      ensure_parent(plot);
      const LabeledCdf c{fs::path(cdf_path).filename().string(), cdf};
      PlotStyle st;
      st.title = "CDF " + c.label;
      write_text(plot, render_cdf_svg(std::span(&c, 1), st));
    }
    log.info("cdf of " + cdf_path + ": " + std::to_string(cdf.n_samples()) + " foreground voxels");
    return kOk;
  }
  json j = read_json(lut_path);
  if (j.contains("entries")) {
    if (j.at("entries").empty()) throw Error(ErrorCode::InvalidArgument, "report has no entries");
    j = j.at("entries").at(0).at("lut");
  }
  const IntensityLut lut = lut_from_json(j);
  const auto pts = sample_map(lut, lut.domain().lo, lut.domain().hi, 1024);
  if (!out.empty()) {
    std::string csv = "input,output\n";
    char buf[96];
    for (const auto& [x, y] : pts) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", x, y);
      csv += buf;
    }
    ensure_parent(out);
    write_text(out, csv);
  }
  if (!plot.empty()) {
    PlotStyle st;
    st.title = "intensity mapping";
    st.x_label = "original intensity";
    st.y_label = "harmonized intensity";
    ensure_parent(plot);
    write_text(plot, render_map_svg(pts, st));
  }
  return kOk;
}

int cmd_eval(const AppConfig& cfg, const Log& log, const std::string& template_path,
             const std::string& methods_arg, const std::vector<std::string>& inputs,
             const std::string& out, const std::string& plots, const std::string& report_path) {
  const auto tmpl = load_template(template_path);
  const auto vols = read_all(expand_inputs(inputs));
  std::set<Method> methods;
  std::stringstream ss(methods_arg);
  for (std::string m; std::getline(ss, m, ',');)
    if (!m.empty()) methods.insert(method_from_string(m));
  if (methods.empty()) throw Error(ErrorCode::UsageError, "no methods given");
  const auto opts = harmonize_options(cfg);
  const auto rows = evaluate_cohort(vols, tmpl, methods, opts);
  ensure_parent(out);
  write_text(out, metrics_csv(rows));
  if (!plots.empty()) {
    const auto harmonized = apply_method(Method::CdfMatch, vols, tmpl, opts);
    emit_harmonization_panels(vols, tmpl, harmonized, plots, cfg.grid_size);
  }
  if (!report_path.empty()) {
    const json eff = cfg.to_json();
    json rows_j = json::array();
    for (const auto& r : rows)
      rows_j.push_back({{"method", to_string(r.method)},
                        {"mean_pairwise_ks", r.mean_pairwise_ks},
                        {"mean_ks_to_template",
                         r.mean_ks_to_template ? json(*r.mean_ks_to_template) : json(nullptr)},
                        {"range_utilization", r.range_utilization}});
    ensure_parent(report_path);
    write_text(report_path, json{{"tool", "cdfh"},
                                 {"version", kVersion},
                                 {"config", eff},
                                 {"config_hash", fnv1a_hex(eff.dump())},
                                 {"metrics", rows_j}}
                                    .dump(1) + "\n");
  }
  log.info("evaluated " + std::to_string(vols.size()) + " volumes -> " + out);
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"CDF-matching intensity harmonization", "cdfh"};
  app.set_version_flag("--version", std::string("cdfh ") + kVersion + " (config schema " +
                                        std::to_string(kConfigSchemaVersion) + ")");
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--log-level", f.log_level, "error|warn|info|debug");

  auto* tmpl = app.add_subcommand("template", "Template CDF operations");
  tmpl->require_subcommand(1);
  auto* tbuild = tmpl->add_subcommand("build", "Build a template CDF from a cohort");
  std::string channel, out;
  std::vector<std::string> inputs;
  tbuild->add_option("--channel", channel, "Channel label");
  tbuild->add_option("--controls", f.controls_path, "Control points JSON")->check(CLI::ExistingFile);
  tbuild->add_option("--clip", f.clip, "Clip range lo:hi or none");
  tbuild->add_option("--grid", f.grid, "CDF grid size");
  tbuild->add_option("--out", out, "Output template JSON")->required();
  tbuild->add_option("inputs", inputs, "Cohort volumes or directories")->required();

  auto* harm = app.add_subcommand("harmonize", "Harmonize volumes against templates");
  std::vector<std::string> template_paths, in_paths;
  std::string out_dir, report_path, params_path;
  harm->add_option("--template", template_paths, "Template JSON (one per channel)")->required();
  harm->add_option("--in", in_paths, "Input volumes or directories")->required();
  harm->add_option("--out", out_dir, "Output directory")->required();
  harm->add_option("--report", report_path, "Report JSON");
  harm->add_option("--bits", f.bits, "Quantize to this many bits")->check(CLI::Range(1, 32));
  harm->add_flag("--preserve-background,!--no-preserve-background", f.preserve_background,
                 "Copy background voxels unchanged");
  harm->add_option("--workers", f.workers, "Worker threads");
  harm->add_option("--grid", f.grid, "CDF grid size");
  harm->add_option("--params", params_path, "Frozen dual-scaling parameters JSON (skips fitting)");
  harm->add_flag("--best-effort", f.best_effort, "Exit 2 instead of 1 on per-item failures");
  harm->add_flag("--timing", f.timing, "Include wall times in the report");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic volume");
  std::string spec_path, dtype = "f32";
  std::uint64_t seed = 0;
  synth->add_option("--spec", spec_path, "SynthSpec JSON")->check(CLI::ExistingFile);
  auto* seed_opt = synth->add_option("--seed", seed, "Random seed (overrides spec)");
  synth->add_option("--out", out, "Output .raw path")->required();
  synth->add_option("--dtype", dtype, "u8|u16|i16|f32");

  auto* inspect = app.add_subcommand("inspect", "Export a volume CDF or a LUT");
  std::string cdf_path, lut_path, plot;
  inspect->add_option("--cdf", cdf_path, "Volume to inspect");
  inspect->add_option("--lut", lut_path, "LUT JSON or harmonize report");
  inspect->add_option("--out", out, "CSV output");
  inspect->add_option("--plot", plot, "SVG output");
  inspect->add_option("--grid", f.grid, "CDF grid size");

  auto* eval = app.add_subcommand("eval", "Compare harmonization methods on a cohort");
  std::string eval_template, methods = "stretch,zscore,cdf", plots;
  eval->add_option("--template", eval_template, "Template JSON")->required();
  eval->add_option("--methods", methods, "Comma-separated: stretch,zscore,cdf");
  eval->add_option("--out", out, "Metrics CSV")->required();
  eval->add_option("--plots", plots, "Directory for CDF panels");
  eval->add_option("--report", report_path, "Metrics JSON with effective config");
  eval->add_option("--workers", f.workers, "Worker threads");
  eval->add_option("--grid", f.grid, "CDF grid size");
  eval->add_option("inputs", inputs, "Cohort volumes or directories")->required();

  if (argc <= 1) {
    std::cerr << app.help();
    return kUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cerr << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    std::cerr << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    std::cerr << app.version() << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "cdfh: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  const CLI::App* sub = nullptr;
  for (const auto* s : {tbuild, harm, synth, inspect, eval})
    if (s->parsed()) sub = s;
  try {
    const AppConfig cfg = effective_config(f, app, sub);
    const Log log(cfg.log_level);
    if (tbuild->parsed()) return cmd_template_build(cfg, log, inputs, channel, out);
    if (harm->parsed())
      return cmd_harmonize(cfg, log, f, template_paths, in_paths, out_dir, report_path, params_path);
    if (synth->parsed())
      return cmd_synth(log, spec_path, seed_opt->count() ? std::optional(seed) : std::nullopt, out,
                       dtype);
    if (inspect->parsed()) return cmd_inspect(cfg, log, cdf_path, lut_path, out, plot);
    if (eval->parsed())
      return cmd_eval(cfg, log, eval_template, methods, inputs, out, plots, report_path);
  } catch (const Error& e) {
    std::cerr << "cdfh: " << e.what() << '\n';
    return e.code() == ErrorCode::UsageError ? kUsage : kFailure;
  } catch (const std::exception& e) {
    std::cerr << "cdfh: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace cdfh::cli
