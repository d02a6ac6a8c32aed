#include <cmath>
#include <limits>
#include <random>

#include "cdfh/error.hpp"
#include "cdfh/transform.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cdfh;
using cdfh::testing::flat_volume;

namespace {

DualScaleParams params(double sb, double st, double g, PivotTriple p) { return {sb, st, g, p}; }

// Straight from the definitions, without the library's helpers.
double oracle_lut_ds(double x, double sb, double st, double g, double vb, double vm, double vt) {
  const double xb = x <= vm ? -2.0 + 2.0 * (x - vb) / (vm - vb) : 2.0 * (x - vm) / (vt - vm);
  const double b = 0.5 * std::erfc(xb);
  return (x - vm) * (b * sb + (1 - b) * st) + g;
}

double oracle_top(double x, double vt, double vmax, double vclip) {
  if (x < vt) return x;
  return vt + (vclip - vt) * std::erf(2 * (x - vt) / (vmax - vt));
}

}  // namespace

TEST_CASE("blend examples") {
  const PivotTriple p{100, 200, 400};
  CHECK(blend(200, p) == 0.5);
  CHECK(std::abs(blend(100, p) - 0.99765) < 1e-4);
  CHECK(std::abs(blend(100, p) - (1 - (std::erf(-2.0) + 1) / 2)) < 1e-12);
  CHECK(std::abs(blend(400, p) - 0.00235) < 1e-4);
  CHECK(std::abs(blend(100, p) + blend(400, p) - 1.0) < 1e-15);
}

TEST_CASE("sigma_blend examples") {
  const PivotTriple p{0, 50, 100};
  CHECK(sigma_blend(50, params(1, 3, 0, p)) == 2.0);
  CHECK(std::abs(sigma_blend(0, params(1, 3, 0, p)) - 1.0047) < 1e-3);
  for (double x : {-1e6, -3.0, 12.5, 77.0, 1e6}) CHECK(sigma_blend(x, params(2.5, 2.5, 0, p)) == 2.5);
}

TEST_CASE("lut_ds examples") {
  CHECK(lut_ds(15, params(2, 2, 100, {0, 10, 20})) == 110.0);
  // 50 * (0.99766 * 2 + 0.00234 * 1)
  CHECK(std::abs(lut_ds(100, params(1, 2, 0, {0, 50, 100})) - 99.883) < 0.05);
  CHECK(std::abs(lut_ds(100, params(1, 2, 0, {0, 50, 100})) - oracle_lut_ds(100, 1, 2, 0, 0, 50, 100)) < 1e-12);
  CHECK(lut_ds(50, params(1.3, 0.2, 7.25, {0, 50, 100})) == 7.25);
}

TEST_CASE("lut_ds matches the definition oracle") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-500, 5000), s(0.3, 3.0);
  for (int i = 0; i < 2000; ++i) {
    const double sb = s(rng), st = s(rng), g = u(rng), x = u(rng);
    const PivotTriple p{200, 1000, 3000};
    REQUIRE(std::abs(lut_ds(x, params(sb, st, g, p)) - oracle_lut_ds(x, sb, st, g, 200, 1000, 3000)) <=
            1e-9 * (1 + std::abs(g) + 5000 * 3));
  }
}

TEST_CASE("tail examples") {
  CHECK(lut_top_tail(3300, 3300, 5418, 4095) == 3300.0);
  CHECK(std::abs(lut_top_tail(5418, 3300, 5418, 4095) - (3300 + 795 * std::erf(2.0))) < 1e-9);
  CHECK(std::abs(lut_top_tail(5418, 3300, 5418, 4095) - 4091.3) < 0.5);
  const double rs = 5418 - 3300, rt = 795;
  CHECK(std::abs(lut_top_tail(3300 + rs / 2, 3300, 5418, 4095) - (3300 + 0.8427 * rt)) < 1e-3 * rt);
  CHECK(lut_top_tail(1000, 3300, 5418, 4095) == 1000.0);

  CHECK(lut_bottom_tail(500, 500, 5, 1, 5418) == 500.0);
  CHECK(std::abs(lut_bottom_tail(5, 500, 5, 1, 5418) - 3.33) < 0.05);
  CHECK(lut_bottom_tail(900, 500, 5, 1, 5418) == 900.0);
}

TEST_CASE("property: bottom tail equals its reflection composition") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const double vmin = -100 + 200 * u(rng);
    const double vb = vmin + 10 + 2000 * u(rng);
    const double vclip = vb - 1 - 3000 * u(rng);
    const double vmax = vb + 1 + 5000 * u(rng);
    for (int k = 0; k < 100; ++k) {
      const double x = vmin - 50 + (vb - vmin + 50) * u(rng);
      const double refl = vmax - oracle_top(vmax - x, vmax - vb, vmax - vmin, vmax - vclip);
      REQUIRE(std::abs(lut_bottom_tail(x, vb, vmin, vclip, vmax) - refl) <=
              1e-9 * std::max(1.0, std::abs(refl)));
    }
  }
}

TEST_CASE("property: blend, sigma and tail bounds") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const PivotTriple p{100 * u(rng), 200 + 100 * u(rng), 400 + 500 * u(rng)};
    const double sb = 0.1 + 5 * u(rng), st = 0.1 + 5 * u(rng);
    double prev = std::numeric_limits<double>::infinity();
    // Strict decrease where erfc is not saturated in double precision.
    const double lo = p.bottom - (p.middle - p.bottom), hi = p.top + (p.top - p.middle);
    for (double x = lo; x < hi; x += (hi - lo) / 997) {
      const double b = blend(x, p);
      REQUIRE(b < prev);
      REQUIRE(b > 0.0);
      REQUIRE(b < 1.0);
      prev = b;
    }
    for (double x = -1e4; x < 1e4; x += 3.7) {
      const double b = blend(x, p);
      REQUIRE(b >= 0.0);
      REQUIRE(b <= 1.0);
      const double s = sigma_blend(x, params(sb, st, 0, p));
      REQUIRE(s >= std::min(sb, st) - 1e-15);
      REQUIRE(s <= std::max(sb, st) + 1e-15);
    }
    CHECK(lut_ds(p.middle, params(sb, st, 42.0, p)) == 42.0);

    const double vt = 1000 * u(rng), vmax = vt + 1 + 1000 * u(rng), vclip = vt + 1 + 500 * u(rng);
    const double floor = 1 + 100 * u(rng), vb = floor + 1 + 500 * u(rng), vmin = vb - 1 - 300 * u(rng);
    for (int k = 0; k < 100; ++k) {
      REQUIRE(lut_top_tail(vt + 3000 * u(rng), vt, vmax, vclip) <= vclip);
      REQUIRE(lut_bottom_tail(vb - 3000 * u(rng), vb, vmin, floor, 1e4) >=
              floor - (vb - floor) * (1 - std::erf(2.0)));
    }
  }
}

TEST_CASE("property: uniform scaling is exactly affine") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1e4, 1e4);
  const PivotTriple p{-300, 120, 900};
  for (int i = 0; i < 10000; ++i) {
    const double x = u(rng);
    REQUIRE(std::abs(lut_ds(x, params(1.75, 1.75, 33.0, p)) - ((x - 120) * 1.75 + 33.0)) <= 1e-12 * std::max(1.0, std::abs(x)) * 4);
  }
}

TEST_CASE("compose_lut") {
  const DualScaleParams dp = params(1.2, 0.8, 1650, {500, 1650, 3300});
  SUBCASE("no tails is lut_ds on the domain") {
    const IntensityLut lut(dp, {}, {0, 5000});
    for (double x = 0; x <= 5000; x += 13) CHECK(lut(x) == lut_ds(x, dp));
    CHECK(lut(-10) == lut_ds(0, dp));
    CHECK_FALSE(lut.hard_clamp().has_value());
  }
  SUBCASE("twelve-bit tails contain every input") {
    TailSpec t;
    t.top = TopTail{3300, lut_ds(5418, dp), 4095};
    t.bottom = BottomTail{500, lut_ds(5, dp), 1};
    t.reflect = t.top->max;
    const IntensityLut lut(dp, t, {5, 5418});
    double prev = -1e300;
    for (double x : linspace(5, 5418, 4096)) {
      const double y = lut(x);
      REQUIRE(y >= 1.0);
      REQUIRE(y <= 4095.0);
      REQUIRE(y >= prev);
      prev = y;
    }
  }
  SUBCASE("round trip through json") {
    TailSpec t;
    t.top = TopTail{3300, 5000, 4095};
    const IntensityLut lut(dp, t, {0, 6000});
    const auto back = lut_from_json(to_json(lut));
    CHECK(back.params() == lut.params());
    CHECK(back.tails() == lut.tails());
    CHECK(back.domain() == lut.domain());
    for (double x = 0; x < 6000; x += 97) CHECK(back(x) == lut(x));
  }
  SUBCASE("failures") {
    CHECK_THROWS_AS(IntensityLut(params(20, 1, 0, {0, 50, 100}), {}, {0, 100}, 25.0), Error);
    try {
      IntensityLut(params(20, 1, 0, {0, 50, 100}), {}, {0, 100}, 25.0);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonMonotone);
    }
    TailSpec bad;
    bad.top = TopTail{3300, 3000, 4095};  // max below start
    try {
      IntensityLut(dp, bad, {0, 5000});
      FAIL("expected BadTailSpec");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BadTailSpec);
    }
    CHECK_THROWS_AS(IntensityLut(params(1, 1, 0, {0, 0, 100}), {}, {0, 100}), Error);
    CHECK_THROWS_AS(IntensityLut(params(-1, 1, 0, {0, 50, 100}), {}, {0, 100}), Error);
  }
}

TEST_CASE("apply_lut") {
  std::vector<double> fg;
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(5, 5418);
  for (int i = 0; i < 5000; ++i) fg.push_back(u(rng));
  const auto vol = flat_volume(fg, 300);

  const IntensityLut id(params(1, 1, 1650, {500, 1650, 3300}), {}, {5, 5418});
  const auto same = apply_lut(vol, id);
  for (std::size_t i = 0; i < vol.size(); ++i) CHECK(std::abs(same.voxels()[i] - vol.voxels()[i]) < 1e-9);

  const auto cst = apply_lut(flat_volume(std::vector<double>(100, 777.0), 5), id);
  for (std::size_t i = 0; i < 100; ++i) CHECK(cst.voxels()[i] == id(777.0));

  const DualScaleParams dp = params(1.1, 0.9, 1650, {500, 1650, 3300});
  TailSpec t;
  t.top = TopTail{3300, lut_ds(5418, dp), 4095};
  t.bottom = BottomTail{500, lut_ds(5, dp), 1};
  t.reflect = t.top->max;
  const IntensityLut lut(dp, t, {5, 5418});
  const auto out = apply_lut(vol, lut);
  CHECK(out.dims() == vol.dims());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (vol.voxels()[i] == 0.0) {
      REQUIRE(out.voxels()[i] == 0.0);
    } else {
      REQUIRE(out.voxels()[i] >= 1.0);
      REQUIRE(out.voxels()[i] <= 4095.0);
    }
  }
  const auto ref = apply_lut_serial(vol, lut);
  CHECK(std::equal(out.voxels().begin(), out.voxels().end(), ref.voxels().begin()));
  const auto all = apply_lut(vol, lut, false);
  CHECK(all.voxels().back() == lut(0.0));
}
