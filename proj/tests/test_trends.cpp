#include <catch_amalgamated.hpp>

#include <random>

#include "shoulder/trends.hpp"

using namespace shoulder;
using namespace shoulder::trends;
using Catch::Approx;

namespace {

// Residual pattern (+,-,-,+) repeated: sums to zero and is orthogonal to consecutive x.
std::vector<Point> line_with_orthogonal_noise(int first_year, int n, double slope, double c, double amplitude) {
  static constexpr double pattern[] = {1, -1, -1, 1};
  std::vector<Point> pts;
  for (int i = 0; i < n; ++i) {
    const double x = first_year + i;
    pts.emplace_back(x, slope * x + c + amplitude * pattern[i % 4]);
  }
  return pts;
}

}  // namespace

TEST_CASE("exact line has zero standard error and saturated probability", "[trends]") {
  std::vector<Point> pts;
  for (int x = 0; x < 10; ++x) pts.emplace_back(x, 2.0 * x + 1.0);
  const auto r = linear_trend(pts, Direction::later);
  CHECK(r.fit.slope == Approx(2.0));
  CHECK(r.fit.intercept == Approx(1.0));
  CHECK(r.fit.slope_stderr == Approx(0.0).margin(1e-12));
  CHECK(r.shift_probability == Approx(1.0).margin(1e-12));
  CHECK(r.slope_per_decade() == Approx(20.0));
}

TEST_CASE("symmetric noise around a flat line gives probability one half", "[trends]") {
  const auto pts = line_with_orthogonal_noise(1990, 32, 0.0, 50.0, 3.0);
  const auto r = linear_trend(pts, Direction::earlier);
  CHECK(r.fit.slope == Approx(0.0).margin(1e-12));
  CHECK(r.shift_probability == Approx(0.5).margin(1e-9));
}

TEST_CASE("calibrated synthetic onsets reproduce a 99% earlier shift", "[trends]") {
  // slope -0.24 d/yr over 1959-2022 with noise scaled so slope/stderr = -2.33.
  const int n = 64;
  const double sxx = n * (static_cast<double>(n) * n - 1) / 12.0;
  const double target_stderr = 0.24 / 2.33;
  const double amplitude = target_stderr * std::sqrt(sxx) / std::sqrt(n / (n - 2.0));
  const auto pts = line_with_orthogonal_noise(1959, n, -0.24, 520.0, amplitude);
  const auto r = linear_trend(pts, Direction::earlier);
  CHECK(r.fit.slope == Approx(-0.24).margin(1e-9));
  CHECK(r.fit.slope_stderr == Approx(target_stderr).epsilon(1e-9));
  CHECK(r.slope_per_decade() == Approx(-2.4).margin(1e-8));
  CHECK(r.shift_probability == Approx(0.99).margin(0.005));
}

TEST_CASE("shift probability uses the normal CDF", "[trends]") {
  CHECK(shift_probability(0.0, 1.0, Direction::earlier) == 0.5);
  CHECK(shift_probability(0.0, 1.0, Direction::later) == 0.5);
  CHECK(shift_probability(-2.326, 1.0, Direction::earlier) == Approx(0.99).margin(0.0005));
  CHECK(shift_probability(1.341, 1.0, Direction::later) == Approx(0.91).margin(0.001));
  CHECK(shift_probability(-1.0, 0.0, Direction::earlier) == 1.0);
  CHECK(shift_probability(-1.0, 0.0, Direction::later) == 0.0);
  CHECK(shift_probability(0.0, 0.0, Direction::later) == 0.5);
  CHECK_THROWS(shift_probability(1.0, -1.0, Direction::later));
}

TEST_CASE("earlier and later probabilities are complementary", "[trends][property]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> slope(-5, 5);
  std::uniform_real_distribution<double> se(0.01, 5);
  for (int i = 0; i < 1000; ++i) {
    const double b = slope(rng);
    const double s = se(rng);
    CHECK(shift_probability(b, s, Direction::earlier) + shift_probability(b, s, Direction::later) ==
          Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("trend is equivariant under value shifts and scaling", "[trends][property]") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> noise(0, 6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Point> pts;
    for (int y = 1996; y <= 2022; ++y) pts.emplace_back(y, 70 - 0.1 * (y - 1996) + noise(rng));
    const double c = std::uniform_real_distribution<double>(-100, 100)(rng);
    const double k = std::uniform_real_distribution<double>(0.1, 10)(rng);
    auto shifted = pts;
    auto scaled = pts;
    for (auto& p : shifted) p.second += c;
    for (auto& p : scaled) p.second *= k;
    const auto base = linear_trend(pts, Direction::earlier);
    const auto a = linear_trend(shifted, Direction::earlier);
    const auto b = linear_trend(scaled, Direction::earlier);
    CHECK(a.fit.slope == Approx(base.fit.slope).margin(1e-9));
    CHECK(a.fit.intercept == Approx(base.fit.intercept + c).margin(1e-6));
    CHECK(b.fit.slope == Approx(k * base.fit.slope).epsilon(1e-9));
    CHECK(b.fit.slope_stderr == Approx(k * base.fit.slope_stderr).epsilon(1e-9));
    CHECK(b.shift_probability == Approx(base.shift_probability).margin(1e-12));
  }
}

TEST_CASE("linear trend errors and exclusions", "[trends]") {
  const std::vector<Point> same_x = {{2000, 1}, {2000, 2}, {2000, 3}};
  CHECK_THROWS_WITH(linear_trend(same_x, Direction::later), Catch::Matchers::ContainsSubstring("degenerate"));
  const std::vector<Point> two = {{2000, 1}, {2001, 2}};
  CHECK_THROWS(linear_trend(two, Direction::later));

  const std::vector<Point> pts = {{2000, 1}, {2001, 2}, {2002, 30}, {2003, 4}, {2004, 5}};
  const std::vector<double> drop = {2002};
  const auto r = linear_trend(pts, Direction::later, drop);
  CHECK(r.fit.n == 4);
  CHECK(r.fit.slope == Approx(1.0));
  REQUIRE(r.excluded_points.size() == 1);
  CHECK(r.excluded_points[0].first == 2002);
}

TEST_CASE("studentized trimming removes gross outliers up to the cap", "[trends]") {
  std::vector<Point> pts = line_with_orthogonal_noise(1959, 64, 0.11, 300.0, 1.0);
  pts[10].second += 40;
  pts[30].second -= 35;
  pts[50].second += 45;
  OutlierPolicy policy;
  policy.kind = OutlierPolicy::Kind::studentized;
  const auto r = robust_trend(pts, Direction::later, policy);
  CHECK(r.excluded_points.size() == 3);
  CHECK(r.fit.slope == Approx(0.11).margin(0.01));

  for (int i = 0; i < 8; ++i) pts[static_cast<std::size_t>(5 + 7 * i)].second += 60 + 5 * i;
  const auto capped = robust_trend(pts, Direction::later, policy);
  CHECK(capped.excluded_points.size() == 5);

  OutlierPolicy none;
  CHECK(robust_trend(pts, Direction::later, none).excluded_points.empty());
}

TEST_CASE("confidence band is narrowest at the mean abscissa", "[trends]") {
  const auto pts = line_with_orthogonal_noise(2000, 12, 1.0, 0.0, 2.0);
  const auto fit = fit_line(pts);
  CHECK(t_critical(10) == Approx(2.228139).margin(1e-6));
  const std::vector<double> xs = {fit.x_mean, 2000, 2011};
  const auto band = confidence_band(fit, xs);
  CHECK(band[0].high - band[0].fitted == Approx(t_critical(10) * fit.residual_sd / std::sqrt(12.0)));
  CHECK(band[1].high - band[1].low > band[0].high - band[0].low);
  for (const auto& b : band) CHECK(b.low <= b.fitted);
}

TEST_CASE("moving average", "[trends]") {
  const std::vector<Point> pts = {{1, 1}, {2, 2}, {3, 3}, {4, 4}, {5, 5}};
  const auto ma = moving_average(pts, 3);
  const std::vector<double> expect = {1.5, 2, 3, 4, 4.5};
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(ma[i].second == Approx(expect[i]));
  CHECK(moving_average(pts, 1) == pts);
  const std::vector<Point> flat = {{1, 7}, {2, 7}, {4, 7}, {5, 7}, {6, 7}};
  for (const auto& p : moving_average(flat, 5)) CHECK(p.second == 7.0);
  // 2001 absent: window for 2002 with k=3 is {2002, 2003}.
  const std::vector<Point> gap = {{2000, 1}, {2002, 3}, {2003, 5}};
  CHECK(moving_average(gap, 3)[1].second == Approx(4.0));
  CHECK_THROWS(moving_average(pts, 4));
  CHECK_THROWS(moving_average(pts, 0));
}

TEST_CASE("pearson with seasonal cutoffs", "[trends]") {
  std::map<int, Date> x, y, neg;
  for (int yr = 2000; yr < 2010; ++yr) {
    const Date d = Date(yr, 2, 20) + (yr - 2000) * 3;
    x[yr] = d;
    y[yr] = d;
    neg[yr] = date_from_day_of_year(yr, 200 - d.day_of_year());
  }
  CHECK(pearson_with_cutoff(x, y, windows::Season::spring, kSpringCutoff).r == Approx(1.0));
  CHECK(pearson_with_cutoff(x, neg, windows::Season::spring, kSpringCutoff).r == Approx(-1.0));

  // An early x onset is excluded in spring.
  x[2010] = Date(2010, 1, 20);
  y[2010] = Date(2010, 5, 1);
  const auto r = pearson_with_cutoff(x, y, windows::Season::spring, kSpringCutoff);
  CHECK(r.excluded_count == 1);
  CHECK(r.excluded_years == std::vector<int>{2010});
  CHECK(r.n_used == 10);
  CHECK(r.r == Approx(1.0));

  // Fall: later than Nov 25 is excluded, Nov 25 itself kept.
  std::map<int, Date> fx, fy;
  for (int yr = 2000; yr < 2005; ++yr) {
    fx[yr] = Date(yr, 10, 1) + yr - 2000;
    fy[yr] = Date(yr, 10, 10) + 2 * (yr - 2000);
  }
  fx[2005] = Date(2005, 11, 25);
  fy[2005] = Date(2005, 10, 20);
  fx[2006] = Date(2006, 11, 26);
  fy[2006] = Date(2006, 7, 1);
  const auto f = pearson_with_cutoff(fx, fy, windows::Season::fall, kFallCutoff);
  CHECK(f.excluded_years == std::vector<int>{2006});
  CHECK(f.n_used == 6);

  std::map<int, Date> few = {{2000, Date(2000, 3, 1)}, {2001, Date(2001, 3, 2)}};
  CHECK_THROWS(pearson_with_cutoff(few, few, windows::Season::spring, kSpringCutoff));
  CHECK(MonthDay::parse("02-14").month == 2);
  CHECK_THROWS(MonthDay::parse("2-14"));
}

TEST_CASE("pearson is invariant under positive affine maps", "[trends][property]") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Point> pts, mapped;
    const double a = std::uniform_real_distribution<double>(0.1, 10)(rng);
    const double b = std::uniform_real_distribution<double>(-50, 50)(rng);
    for (int i = 0; i < 20; ++i) {
      const double x = n(rng);
      const double y = 0.5 * x + n(rng);
      pts.emplace_back(x, y);
      mapped.emplace_back(a * x + b, y * 3 - 7);
    }
    CHECK(pearson(mapped) == Approx(pearson(pts)).margin(1e-12));
    CHECK(std::abs(pearson(pts)) <= 1.0);
  }
}
