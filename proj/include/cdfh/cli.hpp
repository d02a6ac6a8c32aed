#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "cdfh/fit.hpp"
#include "cdfh/transform.hpp"

namespace cdfh::cli {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kConfigSchemaVersion = 1;

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kPartial = 2,  // per-item failures under --best-effort
  kUsage = 64,
};

/// Effective settings shared by all subcommands. Precedence: command-line
/// flags > config file > built-in defaults.
struct AppConfig {
  ControlPoints controls;
  std::optional<Interval> clip = Interval{1.0, 4095.0};
  std::size_t grid_size = 1024;
  FitConfig fit;
  int workers = 1;
  std::string log_level = "info";
  std::optional<int> bits;
  bool preserve_background = true;

  nlohmann::json to_json() const;
  /// Overlays the keys present in `j` onto `base`.
  static AppConfig from_json(const nlohmann::json& j, AppConfig base);
  static AppConfig from_json(const nlohmann::json& j) { return from_json(j, AppConfig{}); }
};

/// Parses "lo:hi" or "none".
std::optional<Interval> parse_clip(const std::string& s);

/// Entry point of the cdfh executable. Diagnostics go to stderr only.
int run(int argc, const char* const* argv);

}  // namespace cdfh::cli
