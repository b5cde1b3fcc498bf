#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <sstream>

#include "shoulder/projection.hpp"

using namespace shoulder;
using namespace shoulder::projection;
using Catch::Approx;

namespace {

std::vector<EnsembleRecord> flat_member(const std::string& id, int year, double t) {
  std::vector<EnsembleRecord> out;
  for (unsigned m = 1; m <= 12; ++m) out.push_back({id, year, m, t});
  return out;
}

std::vector<OnsetProjection> band(int from, int to, double start, double per_year, double half) {
  std::vector<OnsetProjection> out;
  for (int y = from; y <= to; ++y) {
    const double c = start + per_year * (y - from);
    out.push_back({y, c, c - half, c + half});
  }
  return out;
}

}  // namespace

TEST_CASE("ensemble file parsing", "[projection]") {
  std::istringstream in("member,year,month,t2m_c\nm001,2030,1,10.5\nm001,2030,2,11\n");
  const auto recs = parse_ensemble(in);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].member == "m001");
  CHECK(recs[1].month == 2);
  std::istringstream bad("member,year,month,t2m_c\nm001,2030,13,10.5\n");
  CHECK_THROWS_AS(parse_ensemble(bad), ParseError);
}

TEST_CASE("ensemble annual statistics", "[projection]") {
  auto a = flat_member("a", 2030, 15.0);
  auto b = flat_member("b", 2030, 17.0);
  std::vector<EnsembleRecord> both = a;
  both.insert(both.end(), b.begin(), b.end());
  const auto s = ensemble_annual_stats(both);
  REQUIRE(s.size() == 1);
  CHECK(s[0].mean_c == Approx(16.0));
  CHECK(s[0].std_c == Approx(1.0));
  CHECK(s[0].n_members == 2);

  auto same = flat_member("x", 2031, 12.0);
  auto same2 = flat_member("y", 2031, 12.0);
  same.insert(same.end(), same2.begin(), same2.end());
  CHECK(ensemble_annual_stats(same)[0].std_c == 0.0);

  const auto single = ensemble_annual_stats(flat_member("only", 2032, 20.0));
  CHECK(single[0].std_c == 0.0);
  CHECK(single[0].n_members == 1);

  // Months are weighted by their day counts: only January warm.
  auto jan = flat_member("j", 2033, 0.0);
  jan[0].t2m_c = 36.5;
  CHECK(ensemble_annual_stats(jan)[0].mean_c == Approx(36.5 * 31 / 365));

  auto incomplete = flat_member("i", 2034, 1.0);
  incomplete.pop_back();
  CHECK_THROWS_WITH(ensemble_annual_stats(incomplete), Catch::Matchers::ContainsSubstring("incomplete member-year"));
  auto dup = flat_member("d", 2034, 1.0);
  dup.push_back(dup.front());
  CHECK_THROWS_WITH(ensemble_annual_stats(dup), Catch::Matchers::ContainsSubstring("duplicate"));
}

TEST_CASE("ensemble statistics do not depend on member order", "[projection][property]") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> t(18, 2);
  std::vector<EnsembleRecord> recs;
  for (int m = 0; m < 40; ++m) {
    for (int y = 2020; y < 2025; ++y) {
      for (unsigned mo = 1; mo <= 12; ++mo) recs.push_back({"m" + std::to_string(m), y, mo, t(rng)});
    }
  }
  const auto base = ensemble_annual_stats(recs);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(recs.begin(), recs.end(), rng);
    const auto s = ensemble_annual_stats(recs);
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(std::abs(s[i].mean_c - base[i].mean_c) <= 1e-10);
      CHECK(std::abs(s[i].std_c - base[i].std_c) <= 1e-10);
    }
  }
}

TEST_CASE("bias correction recovers affine maps", "[projection]") {
  std::vector<EnsembleAnnualStats> ens;
  std::map<int, double> affine, identity, offset;
  for (int y = 1959; y <= 2022; ++y) {
    const double raw = 19.0 + 0.02 * (y - 1959) + 0.3 * std::sin(y * 1.7);
    ens.push_back({y, raw, 0.4, 100});
    affine[y] = 0.92 * raw + 1.0;
    identity[y] = raw;
    offset[y] = raw + 2.0;
  }
  const auto bc = fit_bias_correction(affine, ens, 1959, 2022);
  CHECK(std::abs(bc.gain - 0.92) <= 1e-9);
  CHECK(std::abs(bc.offset - 1.0) <= 1e-9);
  for (const auto& e : ens) CHECK(std::abs(bc.apply(e.mean_c) - affine[e.year]) <= 1e-9);

  const auto id = fit_bias_correction(identity, ens, 1959, 2022);
  CHECK(id.gain == Approx(1.0).margin(1e-12));
  CHECK(id.offset == Approx(0.0).margin(1e-10));
  const auto off = fit_bias_correction(offset, ens, 1959, 2022);
  CHECK(off.gain == Approx(1.0).margin(1e-12));
  CHECK(off.offset == Approx(2.0).margin(1e-10));

  CHECK_THROWS_WITH(fit_bias_correction(affine, ens, 2021, 2022), Catch::Matchers::ContainsSubstring("at least 3"));
  std::vector<EnsembleAnnualStats> flat = {{2000, 5, 0, 1}, {2001, 5, 0, 1}, {2002, 5, 0, 1}};
  CHECK_THROWS_WITH(fit_bias_correction(affine, flat, 1959, 2022), Catch::Matchers::ContainsSubstring("degenerate"));
}

TEST_CASE("positive-gain correction preserves ordering", "[projection][property]") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(10, 25);
  std::vector<EnsembleAnnualStats> ens;
  for (int y = 2000; y < 2100; ++y) ens.push_back({y, u(rng), 0.5, 10});
  const BiasCorrection bc{0.92, 1.0};
  const auto path = corrected_path(ens, bc);
  for (std::size_t i = 0; i < ens.size(); ++i) {
    for (std::size_t j = 0; j < ens.size(); ++j) {
      if (ens[i].mean_c < ens[j].mean_c) CHECK(path[i].mean_c < path[j].mean_c);
    }
    CHECK(path[i].std_c == Approx(0.46));
  }
}

TEST_CASE("onset versus temperature regression", "[projection]") {
  std::map<int, double> temps, onsets;
  for (int y = 1959; y <= 2022; ++y) {
    temps[y] = 19.0 + 0.015 * (y - 1959) + 0.4 * std::sin(y * 0.9);
    onsets[y] = 300.0 - 8.0 * temps[y];
  }
  const auto exact = onset_vs_temperature(temps, onsets, windows::Season::spring);
  CHECK(exact.fit.slope == Approx(-8.0).margin(1e-9));
  CHECK(exact.direction == trends::Direction::earlier);

  // Permutation control: shuffled onsets lose the relationship.
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0, 1.0);
  std::map<int, double> noisy;
  for (const auto& [y, d] : onsets) noisy[y] = d + noise(rng);
  std::vector<double> values;
  for (const auto& [y, d] : noisy) values.push_back(d);
  std::shuffle(values.begin(), values.end(), rng);
  std::map<int, double> shuffled;
  std::size_t i = 0;
  for (const auto& [y, d] : noisy) shuffled[y] = values[i++];
  const auto real = onset_vs_temperature(temps, noisy, windows::Season::spring);
  const auto perm = onset_vs_temperature(temps, shuffled, windows::Season::spring);
  CHECK(std::abs(perm.fit.slope) < 0.5 * std::abs(real.fit.slope));
  CHECK(perm.fit.residual_sd > 2.0 * real.fit.residual_sd);
  CHECK(perm.fit.mean_stderr(21.0) > real.fit.mean_stderr(21.0));
}

TEST_CASE("projected onsets propagate temperature through the line", "[projection]") {
  trends::LinearFit line;
  line.slope = -8.0;
  line.intercept = 200.0;
  line.n = 64;
  line.x_mean = 20.0;
  line.sxx = 30.0;
  line.residual_sd = 6.0;

  std::vector<CorrectedTemperature> flat, warming;
  for (int y = 2023; y <= 2060; ++y) {
    flat.push_back({y, 20.5, 0.3});
    warming.push_back({y, 20.5 + 0.03 * (y - 2023), 0.3});
  }
  const auto f = project_onsets(line, flat, 2023, 2060);
  for (const auto& p : f) CHECK(p.predicted_onset == Approx(f.front().predicted_onset));

  const auto w = project_onsets(line, warming, 2023, 2060);
  // +0.3 degC/decade x -8 d/degC = -2.4 d/decade
  CHECK(w[10].predicted_onset - w[0].predicted_onset == Approx(-2.4).margin(1e-9));
  for (const auto& p : w) {
    CHECK(p.ci_low <= p.predicted_onset);
    CHECK(p.predicted_onset <= p.ci_high);
  }
  // Half-width = sqrt((t * se_mean)^2 + (slope * 2 sigma)^2)
  const double t = trends::t_critical(62);
  const double se = line.mean_stderr(20.5);
  CHECK(f[0].ci_high - f[0].predicted_onset == Approx(std::hypot(t * se, 8.0 * 2 * 0.3)));

  trends::LinearFit exact = line;
  exact.residual_sd = 0.0;
  std::vector<CorrectedTemperature> no_spread = {{2030, 21.0, 0.0}};
  const auto d = project_onsets(exact, no_spread, 2030, 2030);
  CHECK(d[0].ci_low == d[0].ci_high);

  trends::LinearFit zero = line;
  zero.slope = 0.0;
  const auto z = project_onsets(zero, warming, 2023, 2060);
  for (const auto& p : z) CHECK(p.predicted_onset == 200.0);

  CHECK_THROWS_WITH(project_onsets(line, flat, 2023, 2061), Catch::Matchers::ContainsSubstring("2061"));
}

TEST_CASE("merge year detection", "[projection]") {
  // Parallel bands far apart never merge.
  CHECK_FALSE(merge_year(band(2023, 2100, 60, 0, 5), band(2023, 2100, 300, 0, 5)).has_value());

  // k = year - 2020. Spring centre 35 - 2k, fall centre 325 + 2k, both half-width 3. Fall year y
  // is compared with spring y + 1 shifted by D = days_in_year(y), so the intervals overlap when
  // |(325 + 2k) - (33 - 2k + D)| <= 6, i.e. D - 298 <= 4k <= D - 286.
  // D = 365: k in {17, 18, 19} (2037-2039). 2040 is leap (D = 366): 4k = 80 <= 80, overlaps.
  // 2041 (D = 365): 84 > 79, the bands have crossed.
  const auto spring = band(2020, 2100, 35, -2, 3);
  auto fall = band(2020, 2100, 325, 2, 3);
  CHECK(merge_year(spring, fall, 3) == 2037);
  CHECK(merge_year(spring, fall, 4) == 2037);
  CHECK_FALSE(merge_year(spring, fall, 5).has_value());

  // A single early overlap does not persist.
  fall[10].ci_high = 500;  // 2030
  CHECK(merge_year(spring, fall, 1) == 2030);
  CHECK(merge_year(spring, fall, 3) == 2037);
  CHECK_THROWS(merge_year(spring, fall, 0));
}

TEST_CASE("wider intervals never delay the merge year", "[projection][property]") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> slope(0.0, 3.0);
  std::uniform_real_distribution<double> half(0.0, 20.0);
  std::uniform_real_distribution<double> extra(0.0, 10.0);
  for (int trial = 0; trial < 300; ++trial) {
    const auto spring = band(2020, 2100, 50, -slope(rng), half(rng));
    const auto fall = band(2020, 2100, 310, slope(rng), half(rng));
    auto wide_spring = spring;
    auto wide_fall = fall;
    for (auto& p : wide_spring) {
      p.ci_low -= extra(rng);
      p.ci_high += extra(rng);
    }
    for (auto& p : wide_fall) {
      p.ci_low -= extra(rng);
      p.ci_high += extra(rng);
    }
    const auto narrow = merge_year(spring, fall, 3);
    const auto wide = merge_year(wide_spring, wide_fall, 3);
    if (narrow) {
      REQUIRE(wide.has_value());
      CHECK(*wide <= *narrow);
    }
  }
}
