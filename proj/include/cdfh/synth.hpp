#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdfh/volume.hpp"

namespace cdfh {

struct MixtureComponent {
  enum class Kind { Gaussian, LogNormal };
  Kind kind = Kind::LogNormal;
  double weight = 1.0;
  double mu = 0.0;     // mean (Gaussian) or log-mean (LogNormal)
  double sigma = 1.0;  // std (Gaussian) or log-std (LogNormal)
  bool operator==(const MixtureComponent&) const = default;
};

/// Acquisition differences applied after sampling: the upper tail above
/// `tail_quantile` of the drawn sample is stretched by `tail_weight`, then
/// x -> gain * x^gamma + offset (sign-preserving power).
struct ScannerEffect {
  double gain = 1.0;
  double offset = 0.0;
  double gamma = 1.0;
  double tail_weight = 1.0;
  double tail_quantile = 0.9;
  bool operator==(const ScannerEffect&) const = default;
};

/// Spherical high-intensity blobs (intensity multiplied by `boost`) covering
/// about `fraction` of the foreground.
struct LesionSpec {
  int count = 0;
  double boost = 2.0;
  double fraction = 0.0;
  bool operator==(const LesionSpec&) const = default;
};

struct SynthSpec {
  Dims dims{48, 48, 24};
  std::vector<MixtureComponent> mixture{{MixtureComponent::Kind::LogNormal, 1.0, 6.0, 0.35}};
  ScannerEffect scanner;
  LesionSpec lesions;
  /// Foreground is the inscribed ellipsoid; the rest is background (0).
  bool background_shell = true;
  std::string channel = "T2";
  std::uint64_t seed = 0;

  void validate() const;  // throws BadSpec
  bool operator==(const SynthSpec&) const = default;
};

/// Deterministic per seed, bit-for-bit across platforms (own normal sampler
/// on top of mt19937_64).
Volume generate_synthetic(const SynthSpec& spec);

/// Analytic mean/variance of the base mixture (before scanner effects).
double mixture_mean(const std::vector<MixtureComponent>& mixture);
double mixture_variance(const std::vector<MixtureComponent>& mixture);

nlohmann::json to_json(const SynthSpec& s);
SynthSpec synth_spec_from_json(const nlohmann::json& j);

}  // namespace cdfh
