#include "cdfh/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cdfh/error.hpp"

namespace cdfh {

void SynthSpec::validate() const {
  if (dims.count() == 0) throw Error(ErrorCode::BadSpec, "dims must be positive");
  if (mixture.empty()) throw Error(ErrorCode::BadSpec, "mixture needs at least one component");
  double w = 0.0;
  for (const auto& c : mixture) {
    if (!(c.weight > 0.0)) throw Error(ErrorCode::BadSpec, "mixture weights must be positive");
    if (!(c.sigma > 0.0)) throw Error(ErrorCode::BadSpec, "component sigma must be positive");
    w += c.weight;
  }
  if (std::abs(w - 1.0) > 1e-9) throw Error(ErrorCode::BadSpec, "mixture weights must sum to 1");
  if (!(scanner.gain > 0.0)) throw Error(ErrorCode::BadSpec, "gain must be positive");
  if (!(scanner.gamma > 0.0)) throw Error(ErrorCode::BadSpec, "gamma must be positive");
  if (!(scanner.tail_weight > 0.0)) throw Error(ErrorCode::BadSpec, "tail weight must be positive");
  if (!(scanner.tail_quantile > 0.0 && scanner.tail_quantile < 1.0))
    throw Error(ErrorCode::BadSpec, "tail quantile must lie in (0,1)");
  if (lesions.count < 0) throw Error(ErrorCode::BadSpec, "lesion count must be >= 0");
  if (lesions.count > 0 && !(lesions.fraction > 0.0 && lesions.fraction < 1.0))
    throw Error(ErrorCode::BadSpec, "lesion fraction must lie in (0,1)");
  if (!(lesions.boost > 0.0)) throw Error(ErrorCode::BadSpec, "lesion boost must be positive");
}

namespace {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  // 53-bit uniform in [0,1).
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  double normal() {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * n); }

 private:
  std::mt19937_64 rng_;
};

double signed_pow(double x, double g) {
  if (g == 1.0) return x;
  return std::copysign(std::pow(std::abs(x), g), x);
}

}  // namespace

Volume generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  const Dims d = spec.dims;
  const std::size_t n = d.count();

  std::vector<char> fg(n, 1);
  if (spec.background_shell) {
    const double cx = 0.5 * d.nx, cy = 0.5 * d.ny, cz = 0.5 * d.nz;
    for (std::size_t z = 0; z < d.nz; ++z)
      for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t x = 0; x < d.nx; ++x) {
          const double dx = (x + 0.5 - cx) / cx, dy = (y + 0.5 - cy) / cy;
          const double dz = d.nz > 1 ? (z + 0.5 - cz) / cz : 0.0;
          fg[x + d.nx * (y + d.ny * z)] = dx * dx + dy * dy + dz * dz <= 1.0;
        }
  }

  Sampler s(spec.seed);
  std::vector<double> v(n, 0.0);
  std::vector<std::size_t> fg_index;
  fg_index.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!fg[i]) continue;
    fg_index.push_back(i);
    const double u = s.uniform();
    double acc = 0.0;
    const MixtureComponent* c = &spec.mixture.back();
    for (const auto& m : spec.mixture) {
      acc += m.weight;
      if (u < acc) {
        c = &m;
        break;
      }
    }
    const double z = s.normal();
    v[i] = c->kind == MixtureComponent::Kind::Gaussian ? c->mu + c->sigma * z
                                                       : std::exp(c->mu + c->sigma * z);
  }
  if (fg_index.empty()) throw Error(ErrorCode::BadSpec, "volume has no foreground voxels");

  if (spec.scanner.tail_weight != 1.0) {
    std::vector<double> tmp;
    tmp.reserve(fg_index.size());
    for (auto i : fg_index) tmp.push_back(v[i]);
    const auto k = static_cast<std::size_t>(spec.scanner.tail_quantile * (tmp.size() - 1));
    std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(k), tmp.end());
    const double thr = tmp[k];
    for (auto i : fg_index)
      if (v[i] > thr) v[i] = thr + (v[i] - thr) * spec.scanner.tail_weight;
  }

  if (spec.lesions.count > 0) {
    const double per_blob = spec.lesions.fraction * static_cast<double>(fg_index.size()) /
                            spec.lesions.count;
    const double r = d.nz > 1 ? std::cbrt(per_blob * 3.0 / (4.0 * std::numbers::pi))
                              : std::sqrt(per_blob / std::numbers::pi);
    const auto ri = static_cast<long>(std::ceil(r));
    for (int b = 0; b < spec.lesions.count; ++b) {
      const std::size_t c = fg_index[s.below(fg_index.size())];
      const long cx = static_cast<long>(c % d.nx);
      const long cy = static_cast<long>((c / d.nx) % d.ny);
      const long cz = static_cast<long>(c / (d.nx * d.ny));
      for (long z = std::max(0L, cz - ri); z <= std::min<long>(d.nz - 1, cz + ri); ++z)
        for (long y = std::max(0L, cy - ri); y <= std::min<long>(d.ny - 1, cy + ri); ++y)
          for (long x = std::max(0L, cx - ri); x <= std::min<long>(d.nx - 1, cx + ri); ++x) {
            const double q = double(x - cx) * (x - cx) + double(y - cy) * (y - cy) +
                             double(z - cz) * (z - cz);
            const std::size_t i = x + d.nx * (y + d.ny * z);
            // Overlapping blobs boost once.
            if (q <= r * r && fg[i] == 1) {
              v[i] *= spec.lesions.boost;
              fg[i] = 2;
            }
          }
    }
  }

  for (auto i : fg_index) {
    double x = spec.scanner.gain * signed_pow(v[i], spec.scanner.gamma) + spec.scanner.offset;
    if (x == 0.0) x = std::nextafter(0.0, 1.0);  // 0 is reserved for background
    v[i] = x;
  }
  return Volume(d, std::move(v), spec.channel, 0.0);
}

double mixture_mean(const std::vector<MixtureComponent>& mixture) {
  double m = 0.0;
  for (const auto& c : mixture)
    m += c.weight * (c.kind == MixtureComponent::Kind::Gaussian
                         ? c.mu
                         : std::exp(c.mu + 0.5 * c.sigma * c.sigma));
  return m;
}

double mixture_variance(const std::vector<MixtureComponent>& mixture) {
  double second = 0.0;
  for (const auto& c : mixture) {
    const double s2 = c.sigma * c.sigma;
    second += c.weight * (c.kind == MixtureComponent::Kind::Gaussian
                              ? c.mu * c.mu + s2
                              : std::exp(2.0 * c.mu + 2.0 * s2));
  }
  const double m = mixture_mean(mixture);
  return second - m * m;
}

using nlohmann::json;

json to_json(const SynthSpec& s) {
  json mix = json::array();
  for (const auto& c : s.mixture)
    mix.push_back({{"kind", c.kind == MixtureComponent::Kind::Gaussian ? "gaussian" : "lognormal"},
                   {"weight", c.weight},
                   {"mu", c.mu},
                   {"sigma", c.sigma}});
  return {{"dims", {s.dims.nx, s.dims.ny, s.dims.nz}},
          {"mixture", mix},
          {"scanner",
           {{"gain", s.scanner.gain},
            {"offset", s.scanner.offset},
            {"gamma", s.scanner.gamma},
            {"tail_weight", s.scanner.tail_weight},
            {"tail_quantile", s.scanner.tail_quantile}}},
          {"lesions",
           {{"count", s.lesions.count}, {"boost", s.lesions.boost}, {"fraction", s.lesions.fraction}}},
          {"background_shell", s.background_shell},
          {"channel", s.channel},
          {"seed", s.seed}};
}

SynthSpec synth_spec_from_json(const json& j) {
  SynthSpec s;
  try {
    if (j.contains("dims")) {
      const auto& d = j.at("dims");
      s.dims = {d.at(0).get<std::size_t>(), d.at(1).get<std::size_t>(),
                d.size() > 2 ? d.at(2).get<std::size_t>() : 1};
    }
    if (j.contains("mixture")) {
      s.mixture.clear();
      for (const auto& c : j.at("mixture")) {
        const auto kind = c.value("kind", std::string("lognormal"));
        if (kind != "gaussian" && kind != "lognormal")
          throw Error(ErrorCode::BadSpec, "unknown mixture kind " + kind);
        s.mixture.push_back({kind == "gaussian" ? MixtureComponent::Kind::Gaussian
                                                : MixtureComponent::Kind::LogNormal,
                             c.at("weight").get<double>(), c.at("mu").get<double>(),
                             c.at("sigma").get<double>()});
      }
    }
    if (j.contains("scanner")) {
      const auto& c = j.at("scanner");
      s.scanner.gain = c.value("gain", 1.0);
      s.scanner.offset = c.value("offset", 0.0);
      s.scanner.gamma = c.value("gamma", 1.0);
      s.scanner.tail_weight = c.value("tail_weight", 1.0);
      s.scanner.tail_quantile = c.value("tail_quantile", 0.9);
    }
    if (j.contains("lesions")) {
      const auto& c = j.at("lesions");
      s.lesions.count = c.value("count", 0);
      s.lesions.boost = c.value("boost", 2.0);
      s.lesions.fraction = c.value("fraction", 0.0);
    }
    s.background_shell = j.value("background_shell", true);
    s.channel = j.value("channel", std::string("T2"));
    s.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadSpec, e.what());
  }
  s.validate();
  return s;
}

}  // namespace cdfh
