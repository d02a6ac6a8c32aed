#include <cmath>
#include <random>
#include <ranges>

#include "cdfh/error.hpp"
#include "cdfh/pipeline.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cdfh;
using cdfh::testing::cohort_spec;
using cdfh::testing::synthetic_cohort;

namespace {

const std::vector<Volume>& cohort9() {
  static const auto c = synthetic_cohort(9);
  return c;
}

const TemplateCdf& template9() {
  static const auto t = build_template(cohort9(), ControlPoints{}, Interval{1, 4095});
  return t;
}

// Inverse-transform sample of the template curve inside an ellipsoid-free cube.
Volume template_sample(const TemplateCdf& t, std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> fg(n);
  for (auto& v : fg) v = t.cdf.quantile(std::max(u(rng), 1e-9));
  return cdfh::testing::flat_volume(std::move(fg), 500);
}

double foreground_ks(const Volume& v, const TemplateCdf& t) { return ks_distance(build_cdf(v), t.cdf); }

}  // namespace

TEST_CASE("harmonizing template samples") {
  constexpr std::size_t n = 60000;
  // Sampling-noise floor: KS of 50 raw self-samples against the template.
  double floor = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s)
    floor = std::max(floor, foreground_ks(template_sample(template9(), 100 + s, n), template9()));
  CHECK(floor < 0.02);

  const auto vol = template_sample(template9(), 5, n);
  const auto h = harmonize(vol, template9());
  CHECK(h.entry.fit.converged);
  CHECK(h.entry.ks_post < 0.02);
  CHECK(h.entry.ks_post <= floor);

  // The same sample seen through a scanner (gain, offset, mild gamma).
  auto warped = vol.voxels() | std::views::transform([](double x) {
    return x == 0.0 ? 0.0 : 0.6 * std::pow(x, 1.08) + 40.0;
  });
  const auto wv = vol.with_voxels(std::vector<double>(warped.begin(), warped.end()));
  const auto hw = harmonize(wv, template9());
  CHECK(hw.entry.ks_post < hw.entry.ks_pre);
  CHECK(hw.entry.ks_post < 0.02);
}

TEST_CASE("near idempotence") {
  for (int i : {0, 4, 8}) {
    const auto once = harmonize(cohort9()[i], template9());
    const auto twice = harmonize(once.volume, template9());
    CHECK(std::abs(twice.entry.fit.params.sigma_bottom - 1.0) < 0.02);
    CHECK(std::abs(twice.entry.fit.params.sigma_top - 1.0) < 0.02);
    CHECK(std::abs(twice.entry.fit.params.shift - 1650.0) < 0.005 * template9().controls.span());
  }
}

TEST_CASE("heterogeneous inputs cluster around the template") {
  for (const auto& v : cohort9()) {
    const auto h = harmonize(v, template9());
    CHECK(h.entry.fit.converged);
    CHECK(h.entry.ks_post < 0.05);
    CHECK(h.entry.ks_post > 0.0);
    CHECK(h.entry.ks_post < h.entry.ks_pre);
    CHECK(std::abs(foreground_ks(h.volume, template9()) - h.entry.ks_post) < 1e-12);
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (v.voxels()[k] == 0.0) {
        REQUIRE(h.volume.voxels()[k] == 0.0);
      } else {
        REQUIRE(h.volume.voxels()[k] >= 1.0);
        REQUIRE(h.volume.voxels()[k] <= 4095.0);
      }
    }
  }
}

TEST_CASE("quantization and frozen parameters") {
  HarmonizeOptions o;
  o.bits = 12;
  const auto h = harmonize(cohort9()[3], template9(), o);
  for (double x : h.volume.voxels()) {
    REQUIRE(x == std::nearbyint(x));
    REQUIRE(x <= 4095.0);
    REQUIRE((x == 0.0 || x >= 1.0));
  }
  HarmonizeOptions f;
  f.frozen = h.entry.fit.params;
  const auto again = harmonize(cohort9()[3], template9(), f);
  const auto plain = harmonize(cohort9()[3], template9());
  CHECK(std::equal(again.volume.voxels().begin(), again.volume.voxels().end(),
                   plain.volume.voxels().begin()));
  CHECK(again.entry.fit.iterations == 0);
}

TEST_CASE("exam harmonization") {
  std::vector<TemplateCdf> templates;
  std::vector<Volume> inputs;
  const char* channels[] = {"FLAIR", "T2", "T1ce"};
  for (int c = 0; c < 3; ++c) {
    std::vector<Volume> cohort;
    for (int i = 0; i < 4; ++i) {
      auto s = cohort_spec(i, 3000 + 100 * c);
      s.channel = channels[c];
      s.mixture[0].mu += 0.3 * c;
      cohort.push_back(generate_synthetic(s));
    }
    templates.push_back(build_template(cohort, ControlPoints{}, Interval{1, 4095}));
    auto s = cohort_spec(6, 4000 + c);
    s.channel = channels[c];
    inputs.push_back(generate_synthetic(s));
  }
  HarmonizeJob job{inputs, templates, {}};
  const auto r = harmonize_exam(job);
  REQUIRE(r.volumes.size() == 3);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(r.volumes[c].channel() == channels[c]);
    CHECK(r.report.entries[c].channel == channels[c]);
    for (double x : r.volumes[c].voxels()) REQUIRE((x == 0.0 || (x >= 1.0 && x <= 4095.0)));
  }

  HarmonizeJob single{{inputs[1]}, templates, {}};
  const auto s = harmonize_exam(single);
  const auto direct = harmonize(inputs[1], templates[1]);
  CHECK(std::equal(s.volumes[0].voxels().begin(), s.volumes[0].voxels().end(),
                   direct.volume.voxels().begin()));

  HarmonizeJob missing{inputs, {templates[0], templates[2]}, {}};
  try {
    harmonize_exam(missing);
    FAIL("expected ChannelMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ChannelMismatch);
  }
}

TEST_CASE("batch matches single calls and keeps order") {
  std::vector<Volume> vols(cohort9().begin(), cohort9().begin() + 5);
  vols.push_back(cdfh::testing::flat_volume({}, 100));  // all background: reported, not fatal
  const auto one = harmonize_batch(vols, template9(), {}, 1);
  const auto four = harmonize_batch(vols, template9(), {}, 4);
  REQUIRE(one.size() == vols.size());
  for (std::size_t i = 0; i < 5; ++i) {
    REQUIRE(one[i].result.has_value());
    const auto direct = harmonize(vols[i], template9());
    CHECK(std::equal(one[i].result->volume.voxels().begin(), one[i].result->volume.voxels().end(),
                     direct.volume.voxels().begin()));
    CHECK(std::equal(four[i].result->volume.voxels().begin(), four[i].result->volume.voxels().end(),
                     direct.volume.voxels().begin()));
  }
  CHECK_FALSE(one.back().result.has_value());
  CHECK_FALSE(one.back().error.empty());
}

TEST_CASE("evaluation on identical volumes is zero everywhere") {
  const std::vector<Volume> same(4, cohort9()[1]);
  const auto rows = evaluate_cohort(same, template9(),
                                    {Method::PercentileStretch, Method::ZScore, Method::CdfMatch});
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) CHECK(r.mean_pairwise_ks == 0.0);
}

TEST_CASE("cdf matching beats both baselines on a multi-scanner cohort") {
  const auto cohort = synthetic_cohort(12, 9000);
  const auto rows = evaluate_cohort(cohort, template9(),
                                    {Method::PercentileStretch, Method::ZScore, Method::CdfMatch});
  double stretch = 0, z = 0, cdf = 0;
  for (const auto& r : rows) {
    if (r.method == Method::PercentileStretch) stretch = r.mean_pairwise_ks;
    if (r.method == Method::ZScore) z = r.mean_pairwise_ks;
    if (r.method == Method::CdfMatch) {
      cdf = r.mean_pairwise_ks;
      CHECK(r.mean_ks_to_template.has_value());
    }
    CHECK(r.range_utilization > 0.0);
    CHECK(r.range_utilization <= 1.0);
  }
  CHECK(cdf < stretch);
  CHECK(cdf < z);
  const auto csv = metrics_csv(rows);
  CHECK(csv.find("cdf") != std::string::npos);
}

TEST_CASE("z-score keeps a heavy upper tail") {
  SynthSpec s = cohort_spec(0);
  s.scanner.tail_weight = 4.0;
  const auto z = zscore_standardize(generate_synthetic(s));
  double mx = 0;
  std::size_t inside = 0, n = 0;
  for (double x : z.voxels()) {
    if (x == 0.0) continue;
    ++n;
    mx = std::max(mx, x);
    if (std::abs(x) < 1.0) ++inside;
  }
  CHECK(mx > 5.0);
  CHECK(static_cast<double>(inside) / static_cast<double>(n) > 0.6);
}

TEST_CASE("percentile stretch") {
  const auto out = percentile_stretch(cohort9()[0], {1, 4095});
  const auto c = build_cdf(out);
  CHECK(c.lo() >= 1.0);
  CHECK(c.hi() <= 4095.0);
  CHECK(std::abs(c.quantile(0.5) - c.quantile(0.5)) == 0.0);
  CHECK(method_from_string("stretch") == Method::PercentileStretch);
  CHECK(to_string(Method::CdfMatch) == "cdf");
  CHECK_THROWS_AS(method_from_string("nyul"), Error);
}

TEST_CASE("reports are deterministic and untimed by default") {
  std::vector<Volume> vols(cohort9().begin(), cohort9().begin() + 3);
  HarmonizeJob a{{vols[0]}, {template9()}, {}};
  const auto r1 = to_json(harmonize_exam(a).report).dump();
  const auto r2 = to_json(harmonize_exam(a).report).dump();
  CHECK(r1 == r2);
  CHECK(r1.find("wall_ms") == std::string::npos);
  CHECK(to_json(harmonize_exam(a).report, true).dump().find("wall_ms") != std::string::npos);
}
