#include <cmath>

#include "cdfh/error.hpp"
#include "cdfh/io.hpp"
#include "cdfh/pipeline.hpp"
#include "cdfh/template.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cdfh;
using cdfh::testing::scratch_dir;
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

}  // namespace

TEST_CASE("nine-volume template") {
  const auto& t = template9();
  CHECK(t.cdf.lo() >= 1.0);
  CHECK(t.cdf.hi() <= 4095.0);
  CHECK(std::abs(t.cdf.quantile(0.5) - 1650.0) <= 16.0);
  const double span = t.controls.span();
  for (const auto& cp : {t.controls.bottom, t.controls.middle, t.controls.top})
    CHECK(std::abs(t.cdf.quantile(cp.p) - cp.t) <= 0.005 * span);
  CHECK(t.channel == "T2");
  CHECK(t.provenance.cohort_size == 9);
  CHECK_FALSE(t.provenance.config_hash.empty());
  CHECK(t.clip == Interval{1, 4095});
}

TEST_CASE("single-volume template is the z-scored curve through the control fit") {
  const std::vector<Volume> one{cohort9()[2]};
  const auto t = build_template(one, ControlPoints{}, std::nullopt);
  const auto z = build_cdf(zscore_standardize(one[0]));
  const auto fit = fit_template_to_controls(z, ControlPoints{});
  const double step = (z.hi() - z.lo()) / static_cast<double>(z.size() - 1);
  const double slope = std::max(fit.params.sigma_bottom, fit.params.sigma_top) * 1.01;
  for (double p = 0.02; p < 0.99; p += 0.02)
    CHECK(std::abs(t.cdf.quantile(p) - lut_ds(z.quantile(p), fit.params)) <= slope * step);
}

TEST_CASE("identical volumes reproduce the single-volume template") {
  const std::vector<Volume> one{cohort9()[4]};
  const std::vector<Volume> three{cohort9()[4], cohort9()[4], cohort9()[4]};
  const auto a = build_template(one, ControlPoints{}, Interval{1, 4095});
  const auto b = build_template(three, ControlPoints{}, Interval{1, 4095});
  REQUIRE(a.cdf.size() == b.cdf.size());
  for (std::size_t i = 0; i < a.cdf.size(); ++i) {
    CHECK(std::abs(a.cdf.xs()[i] - b.cdf.xs()[i]) <= 1e-9 * std::abs(a.cdf.xs()[i]));
    CHECK(std::abs(a.cdf.ps()[i] - b.cdf.ps()[i]) <= 1e-9);
  }
}

TEST_CASE("template ignores cohort order") {
  auto rev = cohort9();
  std::reverse(rev.begin(), rev.end());
  const auto t = build_template(rev, ControlPoints{}, Interval{1, 4095});
  CHECK(t.cdf == template9().cdf);
  CHECK(t.provenance == template9().provenance);
}

TEST_CASE("template errors") {
  CHECK_THROWS_AS(build_template(std::vector<Volume>{}, ControlPoints{}, std::nullopt), Error);
  try {
    build_template(std::vector<Volume>{}, ControlPoints{}, std::nullopt);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyCohort);
  }
}

TEST_CASE("save and load") {
  const auto dir = scratch_dir("template_io");
  const auto path = dir / "t2.json";
  save_template(template9(), path);
  const auto back = load_template(path);
  CHECK(back == template9());

  auto j = read_json(path);
  j["version"] = kTemplateSchemaVersion + 1;
  write_text(dir / "bad.json", j.dump());
  try {
    load_template(dir / "bad.json");
    FAIL("expected SchemaMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaMismatch);
  }

  // Reloaded template harmonizes a probe bit-identically.
  const auto probe = generate_synthetic(cdfh::testing::cohort_spec(11, 77));
  const auto a = harmonize(probe, template9());
  const auto b = harmonize(probe, back);
  CHECK(std::equal(a.volume.voxels().begin(), a.volume.voxels().end(), b.volume.voxels().begin()));
  CHECK(a.entry.fit == b.entry.fit);
}
