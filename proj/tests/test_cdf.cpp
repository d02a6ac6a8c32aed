#include <algorithm>
#include <cmath>
#include <random>

#include "cdfh/cdf.hpp"
#include "cdfh/error.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cdfh;
using cdfh::testing::flat_volume;

namespace {

EmpiricalCdf four_point() { return build_cdf(flat_volume({1, 2, 3, 4}), Background::Include, 4); }

template <class F>
void expect_error(ErrorCode code, F&& f) {
  try {
    f();
    FAIL("expected " << to_string(code));
  } catch (const Error& e) {
    CHECK(e.code() == code);
  }
}

// Random volumes with heavy quantization and a background share.
Volume random_volume(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_dist(20, 400), levels(2, 60), bg(0, 100);
  const int n = n_dist(rng);
  const int l = levels(rng);
  std::uniform_int_distribution<int> v(1, l);
  std::vector<double> fg;
  for (int i = 0; i < n; ++i) fg.push_back(v(rng) * 3.5 - 7.0);
  // Guarantee two distinct foreground values away from the background.
  fg.push_back(1000.0);
  fg.push_back(1001.5);
  std::erase(fg, 0.0);
  return flat_volume(fg, static_cast<std::size_t>(bg(rng)));
}

}  // namespace

TEST_CASE("build_cdf on four uniform ranks") {
  const auto c = four_point();
  CHECK(std::vector<double>(c.xs().begin(), c.xs().end()) == std::vector<double>{1, 2, 3, 4});
  CHECK(std::vector<double>(c.ps().begin(), c.ps().end()) == std::vector<double>{0.25, 0.5, 0.75, 1.0});
  CHECK(c.n_samples() == 4);
}

TEST_CASE("build_cdf error paths") {
  expect_error(ErrorCode::AllBackground, [] { build_cdf(flat_volume({}, 10)); });
  expect_error(ErrorCode::DegenerateConstant, [] { build_cdf(flat_volume({7, 7, 7}, 3)); });
  expect_error(ErrorCode::InvalidArgument, [] { build_cdf(flat_volume({1, 2}), Background::Include, 1); });
}

TEST_CASE("build_cdf of a lognormal sample against the rank oracle") {
  std::mt19937_64 rng(42);
  std::lognormal_distribution<double> d(0.0, 1.0);
  std::vector<double> s(100000);
  for (auto& v : s) v = d(rng);
  const auto c = build_cdf(s);
  const double median = 1.0;  // exp(mu)
  const double oracle = cdfh::testing::rank_fraction(s, median);
  CHECK(std::abs(c.value(median) - 0.5) < 0.01);
  CHECK(std::abs(c.value(median) - oracle) < 0.002);
  CHECK(c.n_samples() == s.size());
}

TEST_CASE("quantile examples") {
  const auto c = four_point();
  CHECK(c.quantile(0.5) == 2.0);
  CHECK(c.quantile(1.0) == 4.0);
  CHECK(c.quantile(0.625) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(c.quantile(0.1) == 1.0);  // below ps[0] clamps
  for (double p : {0.0, -0.2, 1.0000001})
    expect_error(ErrorCode::OutOfRange, [&] { c.quantile(p); });
}

TEST_CASE("cdf_value examples") {
  const auto c = four_point();
  CHECK(c.value(1.0) == 0.25);
  CHECK(c.value(1e9) == 1.0);
  CHECK(c.value(2.5) == doctest::Approx(0.625).epsilon(1e-15));
  CHECK(c.value(0.5) == doctest::Approx(0.125));  // on the left ramp
  CHECK(c.value(-1.0) == 0.0);
}

TEST_CASE("zscore examples") {
  const auto z = zscore_standardize(flat_volume({2, 4}, 2));
  CHECK(z.voxels()[0] == -1.0);
  CHECK(z.voxels()[1] == 1.0);
  CHECK(z.voxels()[2] == 0.0);
  CHECK(z.voxels()[3] == 0.0);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(5.0, 3.0);
  std::vector<double> s(20000);
  for (auto& v : s) v = g(rng);
  const auto out = zscore_standardize(flat_volume(s, 100));
  double sum = 0, n = 0;
  for (double v : out.voxels()) if (v != 0.0) { sum += v; n += 1; }
  const double mean = sum / n;
  double ss = 0;
  for (double v : out.voxels()) if (v != 0.0) ss += (v - mean) * (v - mean);
  CHECK(std::abs(mean) < 1e-9);
  CHECK(std::abs(std::sqrt(ss / n) - 1.0) < 1e-9);

  const auto twice = zscore_standardize(out);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(twice.voxels()[i] - out.voxels()[i]) < 1e-9);

  expect_error(ErrorCode::DegenerateConstant, [] { zscore_standardize(flat_volume({3, 3, 3}, 1)); });
  expect_error(ErrorCode::AllBackground, [] { zscore_standardize(flat_volume({}, 3)); });
}

TEST_CASE("average_cdfs examples") {
  const auto c = four_point();
  const std::vector<EmpiricalCdf> one{c};
  CHECK(average_cdfs(one, 4) == EmpiricalCdf(std::vector<double>(c.xs().begin(), c.xs().end()),
                                             std::vector<double>(c.ps().begin(), c.ps().end()), 4));

  // Steps at 0 and 2: the mean is 1/2 strictly between them.
  const std::vector<EmpiricalCdf> steps{EmpiricalCdf({-1e-6, 0.0}, {0.0, 1.0}),
                                        EmpiricalCdf({2.0 - 1e-6, 2.0}, {0.0, 1.0})};
  const auto avg = average_cdfs(steps, 201);
  for (double x : {0.01, 0.5, 1.0, 1.5, 1.99}) CHECK(avg.value(x) == doctest::Approx(0.5).epsilon(1e-3));

  CHECK_THROWS_AS(average_cdfs(std::vector<EmpiricalCdf>{}), Error);
}

TEST_CASE("average of z-scored cohort lies inside the envelope and ignores order") {
  std::vector<EmpiricalCdf> cdfs;
  for (const auto& v : cdfh::testing::synthetic_cohort(9))
    cdfs.push_back(build_cdf(zscore_standardize(v)));
  const auto avg = average_cdfs(cdfs);
  for (std::size_t i = 0; i < avg.size(); i += 7) {
    const double x = avg.xs()[i];
    double lo = 1.0, hi = 0.0;
    for (const auto& c : cdfs) {
      lo = std::min(lo, c.value(x));
      hi = std::max(hi, c.value(x));
    }
    CHECK(avg.ps()[i] >= lo - 1e-15);
    CHECK(avg.ps()[i] <= hi + 1e-15);
  }
  std::mt19937_64 rng(3);
  for (int k = 0; k < 5; ++k) {
    auto shuffled = cdfs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(average_cdfs(shuffled) == avg);
  }
}

TEST_CASE("property: built CDFs satisfy their invariants") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto vol = random_volume(rng);
    const std::size_t grid = 2 + rng() % 300;
    const auto c = build_cdf(vol, Background::Exclude, grid);
    for (std::size_t i = 1; i < c.size(); ++i) {
      REQUIRE(c.xs()[i] > c.xs()[i - 1]);
      REQUIRE(c.ps()[i] >= c.ps()[i - 1]);
    }
    REQUIRE(std::abs(c.ps().back() - 1.0) <= 1e-12);
    REQUIRE(c.ps().front() >= 0.0);

    // Background never shapes the support.
    double fmin = 1e300, fmax = -1e300;
    for (double v : vol.voxels())
      if (v != 0.0) { fmin = std::min(fmin, v); fmax = std::max(fmax, v); }
    CHECK(c.lo() == fmin);
    CHECK(c.hi() == fmax);

    // Grid nodes invert exactly where ps rises.
    for (std::size_t i = 1; i < c.size(); ++i)
      if (c.ps()[i] > c.ps()[i - 1]) REQUIRE(c.quantile(c.ps()[i]) == c.xs()[i]);

    // Round trip within one grid step.
    const double h = c.xs()[1] - c.xs()[0];
    std::uniform_real_distribution<double> u(c.lo(), c.hi());
    for (int k = 0; k < 20; ++k) {
      const double x = u(rng);
      const double p = c.value(x);
      if (p > 0.0) REQUIRE(std::abs(c.quantile(p) - x) <= h * (1 + 1e-9));
    }
  }
}

TEST_CASE("ks_distance") {
  const EmpiricalCdf a({0.0, 1.0}, {0.0, 1.0});
  const EmpiricalCdf b({0.5, 1.5}, {0.0, 1.0});
  CHECK(ks_distance(a, a) == 0.0);
  CHECK(ks_distance(a, b) == doctest::Approx(0.5));
  CHECK(ks_distance(a, b) == ks_distance(b, a));
}

TEST_CASE("csv round trip and schema check") {
  std::mt19937_64 rng(8);
  const auto c = build_cdf(random_volume(rng), Background::Exclude, 57);
  const auto back = cdf_from_csv(to_csv(c));
  CHECK(std::equal(back.xs().begin(), back.xs().end(), c.xs().begin()));
  CHECK(std::equal(back.ps().begin(), back.ps().end(), c.ps().begin()));
  CHECK(to_csv(c).rfind("intensity,cumulative_probability\n", 0) == 0);
  expect_error(ErrorCode::SchemaMismatch, [] { cdf_from_csv("x,y\n1,0.5\n"); });
}

TEST_CASE("EmpiricalCdf rejects broken invariants") {
  CHECK_THROWS_AS(EmpiricalCdf({1, 1}, {0.5, 1}), Error);
  CHECK_THROWS_AS(EmpiricalCdf({1, 2}, {0.6, 0.5}), Error);
  CHECK_THROWS_AS(EmpiricalCdf({1, 2}, {0.5, 0.9}), Error);
  CHECK_THROWS_AS(EmpiricalCdf({1}, {1}), Error);
}
