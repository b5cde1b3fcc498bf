#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "shoulder/windows.hpp"
#include "window_oracle.hpp"

using namespace shoulder;
using namespace shoulder::windows;
using Catch::Approx;

namespace {

DailySeries make_series(Date first, int n, const std::function<double(int)>& f) {
  DailySeries s;
  s.first = first;
  for (int i = 0; i < n; ++i) s.values.push_back(f(i));
  return s;
}

}  // namespace

TEST_CASE("constant series picks the first day of the half", "[windows]") {
  const auto s = make_series(Date(2020, 1, 1), 366 + 60, [](int) { return 0.1; });
  const auto spring = min_window(s, 2020, Season::spring, {});
  CHECK(spring.onset == Date(2020, 1, 1));
  CHECK(spring.window_mean == Approx(0.1));
  CHECK(spring.days_used == 45);
  const auto fall = min_window(s, 2020, Season::fall, {});
  CHECK(fall.onset == Date(2020, 7, 1));
}

TEST_CASE("V-shaped series centers the window on the minimum", "[windows]") {
  const Date m(2021, 3, 20);
  const auto s = make_series(Date(2021, 1, 1), 365, [&](int i) { return std::abs(static_cast<double>((Date(2021, 1, 1) + i) - m)); });
  const auto w = min_window(s, 2021, Season::spring, {});
  CHECK(w.onset == m - 22);
  const auto oracle = oracle::brute_force_window(s, 2021, Season::spring, {});
  REQUIRE(oracle);
  CHECK(oracle->onset == w.onset);
  CHECK(w.window_mean == Approx(oracle->mean).epsilon(1e-12));
  CHECK(w.onset_doy() == (m - 22).day_of_year());
}

TEST_CASE("min_window matches the exhaustive scan on random series", "[windows][property]") {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::bernoulli_distribution missing(0.03);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int year = 2000 + trial % 20;
    auto s = make_series(Date(year, 1, 1), days_in_year(year) + (trial % 2 ? 40 : 0), [&](int) { return u(rng); });
    if (trial % 3 == 0) {
      for (auto& v : s.values) {
        if (missing(rng)) v = kMissing;
      }
    }
    for (int len : {1, 7, 45}) {
      for (Season season : {Season::spring, Season::fall}) {
        WindowOptions opt;
        opt.length = len;
        opt.cross_year = trial % 4 != 1;
        const auto expect = oracle::brute_force_window(s, year, season, opt);
        if (!expect) {
          CHECK_THROWS(min_window(s, year, season, opt));
          continue;
        }
        const auto got = min_window(s, year, season, opt);
        CHECK(got.onset == expect->onset);
        CHECK(got.window_mean == Approx(expect->mean).epsilon(1e-12));
        CHECK(got.days_used == expect->used);
        ++checked;
      }
    }
  }
  CHECK(checked > 1500);
}

TEST_CASE("window search is invariant under affine rescaling", "[windows][property]") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = make_series(Date(2010, 1, 1), 365, [&](int) { return u(rng); });
    const double c = std::uniform_real_distribution<double>(-50, 50)(rng);
    const double k = std::uniform_real_distribution<double>(0.1, 10)(rng);
    auto shifted = s;
    auto scaled = s;
    for (auto& v : shifted.values) v += c;
    for (auto& v : scaled.values) v *= k;
    for (Season season : {Season::spring, Season::fall}) {
      const auto base = min_window(s, 2010, season, {});
      const auto a = min_window(shifted, 2010, season, {});
      const auto b = min_window(scaled, 2010, season, {});
      CHECK(a.onset == base.onset);
      CHECK(a.window_mean == Approx(base.window_mean + c).margin(1e-9));
      CHECK(b.onset == base.onset);
    }
  }
}

TEST_CASE("length one returns the minimum day of the half", "[windows]") {
  const auto s = make_series(Date(2015, 1, 1), 365, [](int i) { return i == 100 ? -3.0 : (i == 250 ? -7.0 : 1.0); });
  WindowOptions opt;
  opt.length = 1;
  CHECK(min_window(s, 2015, Season::spring, opt).onset == Date(2015, 1, 1) + 100);
  CHECK(min_window(s, 2015, Season::fall, opt).onset == Date(2015, 1, 1) + 250);
}

TEST_CASE("fall windows and the year boundary", "[windows]") {
  // Minimum centred on Dec 20: needs January data to be reachable.
  const Date m(2018, 12, 20);
  auto f = [&](Date d) { return std::abs(static_cast<double>(d - m)); };
  const auto two_years = make_series(Date(2018, 1, 1), 365 + 60, [&](int i) { return f(Date(2018, 1, 1) + i); });
  CHECK(min_window(two_years, 2018, Season::fall, {}).onset == m - 22);

  WindowOptions no_cross;
  no_cross.cross_year = false;
  CHECK(min_window(two_years, 2018, Season::fall, no_cross).onset == Date(2018, 12, 31) - 44);

  const auto one_year = make_series(Date(2018, 1, 1), 365, [&](int i) { return f(Date(2018, 1, 1) + i); });
  CHECK(min_window(one_year, 2018, Season::fall, {}).onset == Date(2018, 12, 31) - 44);
}

TEST_CASE("missing days inside windows", "[windows]") {
  auto s = make_series(Date(2019, 1, 1), 365, [](int) { return 5.0; });
  for (int i = 60; i < 63; ++i) s.values[static_cast<std::size_t>(i)] = kMissing;
  s.values[61 - 1] = kMissing;
  const auto w = min_window(s, 2019, Season::spring, {});
  CHECK(w.onset == Date(2019, 1, 1));
  CHECK(w.days_used == 45);

  // Every candidate window would lack more than 3 days.
  auto sparse = make_series(Date(2019, 1, 1), 365, [](int i) { return i % 5 == 0 ? kMissing : 1.0; });
  CHECK_THROWS_WITH(min_window(sparse, 2019, Season::spring, {}), Catch::Matchers::ContainsSubstring("no admissible"));

  // A low window with 3 missing days still qualifies and is averaged over present days.
  auto dip = make_series(Date(2019, 1, 1), 365, [](int i) { return i >= 100 && i < 145 ? 1.0 : 9.0; });
  for (int i : {110, 120, 130}) dip.values[static_cast<std::size_t>(i)] = kMissing;
  const auto d = min_window(dip, 2019, Season::spring, {});
  CHECK(d.onset == Date(2019, 1, 1) + 100);
  CHECK(d.window_mean == 1.0);
  CHECK(d.days_used == 42);

  CHECK_THROWS(min_window(DailySeries{}, 2019, Season::spring, {}));
  WindowOptions zero;
  zero.length = 0;
  CHECK_THROWS(min_window(dip, 2019, Season::spring, zero));
}

TEST_CASE("shoulder_table covers each metric, year and half", "[windows]") {
  const Date spring_min(2021, 4, 10);
  const Date fall_min(2021, 10, 25);
  auto v = [&](Date d) {
    return std::min(std::abs(static_cast<double>(d - spring_min)), std::abs(static_cast<double>(d - fall_min)));
  };
  const auto dd = make_series(Date(2021, 1, 1), 365, [&](int i) { return v(Date(2021, 1, 1) + i); });
  const auto energy = make_series(Date(2021, 1, 1), 365, [&](int i) { return 1000 + 2 * v(Date(2021, 1, 1) + i); });
  const std::vector<int> years = {2020, 2021};
  const auto rows = shoulder_table({&dd, &energy, nullptr}, years, {});
  REQUIRE(rows.size() == 4);  // 2020 is absent
  CHECK(rows[0].metric == Metric::degree_days);
  CHECK(rows[0].season == Season::spring);
  CHECK(rows[0].onset == spring_min - 22);
  CHECK(rows[1].onset == fall_min - 22);
  CHECK(rows[2].metric == Metric::total_energy);
  CHECK(rows[2].onset == spring_min - 22);
  CHECK(rows[3].onset == fall_min - 22);
  for (const auto& r : rows) {
    const auto o = oracle::brute_force_window(r.metric == Metric::degree_days ? dd : energy, r.year, r.season, {});
    REQUIRE(o);
    CHECK(o->onset == r.onset);
  }

  std::ostringstream out;
  write_shoulder_table(out, rows);
  std::istringstream in(out.str());
  CHECK(parse_shoulder_table(in) == rows);
}
