#pragma once

// Deterministic synthetic inputs for exercising the full pipeline. The temperature signal is a
// piecewise-linear annual cycle whose 15 degC crossings are known in closed form, and peak
// demand follows a cubic whose minimum sits exactly at 15 degC.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "shoulder/csv.hpp"
#include "shoulder/date.hpp"
#include "shoulder/ingest.hpp"
#include "shoulder/thermal.hpp"

namespace shoulder::fixture {

struct FixtureSpec {
  std::uint64_t seed = 1;
  double noise = 1.0;                  // 0 gives a noise-free fixture
  double warming_c_per_year = 0.03;
  double future_warming_c_per_year = 0.07;  // ensemble years after the observations
  int temp_first_year = 1980;
  int temp_last_year = 2022;
  int load_first_year = 1996;
  int load_last_year = 2022;
  std::vector<int> load_absent_years = {2001};
  int mix_first_year = 2019;
  Date outage_first = Date(2021, 5, 1);
  Date outage_last = Date(2022, 12, 31);
  int ensemble_first_year = 1980;
  int ensemble_last_year = 2080;
  int ensemble_members = 5;
  bool raster = false;  // write the grid as a binary raster instead of CSV

  /// Noise-free, three-year fixture whose windows are known analytically.
  static FixtureSpec noise_free() {
    FixtureSpec s;
    s.noise = 0.0;
    s.warming_c_per_year = 0.0;
    s.temp_first_year = 2020;
    s.temp_last_year = 2022;
    s.load_first_year = 2020;
    s.load_last_year = 2022;
    s.load_absent_years.clear();
    s.mix_first_year = 2022;
    s.outage_first = Date(2022, 1, 1);
    s.ensemble_first_year = 2020;
    s.ensemble_last_year = 2030;
    return s;
  }
};

// Cubic peak-demand curve with its minimum at exactly 15 degC.
inline constexpr double kDemandA1 = 1.0;
inline constexpr double kDemandA2 = 50.0;
inline constexpr double kDemandA3 = -2175.0;
inline constexpr double kDemandA4 = 60000.0;
inline constexpr double kDemandT0 = 15.0;

constexpr double demand_mw(double t) { return ((kDemandA1 * t + kDemandA2) * t + kDemandA3) * t + kDemandA4; }

/// Hourly load shape, peaking at exactly 1.0 at 16:00.
inline double hourly_shape(int hour) {
  return 0.85 + 0.15 * std::cos(2.0 * std::numbers::pi * (hour - 16) / 24.0);
}

inline constexpr int kReferenceYear = 2000;
inline constexpr double kWinterLow = 11.0;
inline constexpr double kSummerHigh = 24.0;
inline constexpr int kLowIndex = 14;    // zero-based day index of the annual minimum
inline constexpr int kHighIndex = 196;  // and maximum
inline constexpr int kHalfCycle = kHighIndex - kLowIndex;
// Days from the low (high) to the 15 degC crossing; whole numbers for these extremes.
inline constexpr int kSpringCrossOffset = 56;  // 182 * 4 / 13
inline constexpr int kFallCrossOffset = 126;   // 182 * 9 / 13
static_assert(kSpringCrossOffset * (kSummerHigh - kWinterLow) == kHalfCycle * (kDemandT0 - kWinterLow));
static_assert(kFallCrossOffset * (kSummerHigh - kWinterLow) == kHalfCycle * (kSummerHigh - kDemandT0));

/// Noise-free regional temperature: rises linearly from the winter low (day index 14) to the
/// summer high (index 196), falls back over the next 182 days and holds at the low until the
/// next rise. Both 15 degC crossings therefore land on whole days.
inline double cycle_temperature(Date d, double warming) {
  auto lo = [&](int y) { return kWinterLow + warming * (y - kReferenceYear); };
  auto hi = [&](int y) { return kSummerHigh + warming * (y - kReferenceYear); };
  const int y = d.year();
  int i = d.day_of_year() - 1;
  if (i < kLowIndex) {
    // still on the previous year's descent
    const int j = i + days_in_year(y - 1);
    if (j >= kHighIndex + kHalfCycle) return lo(y);
    return hi(y - 1) - (hi(y - 1) - lo(y)) * (j - kHighIndex) / kHalfCycle;
  }
  if (i <= kHighIndex) return lo(y) + (hi(y) - lo(y)) * (i - kLowIndex) / kHalfCycle;
  return hi(y) - (hi(y) - lo(y + 1)) * (i - kHighIndex) / kHalfCycle;
}

/// Noise-free 15 degC crossings; degree-day windows are centred on them.
inline Date analytic_spring_crossing(int year) { return Date(year, 1, 1) + (kLowIndex + kSpringCrossOffset); }
inline Date analytic_fall_crossing(int year) { return Date(year, 1, 1) + (kHighIndex + kFallCrossOffset); }

/// Small portable RNG wrapper; std distributions differ across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  double uniform() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }
  double symmetric() { return 2.0 * uniform() - 1.0; }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 g_;
};

struct FixtureFiles {
  std::filesystem::path config;
  std::filesystem::path load;
  std::filesystem::path fuel_mix;
  std::filesystem::path grid;
  std::filesystem::path mask;
  std::filesystem::path population;
  std::filesystem::path outages;
  std::filesystem::path ensemble;
};

namespace detail {

inline std::ofstream open(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

}  // namespace detail

/// Writes every input file plus `config.txt` into `dir`.
inline FixtureFiles write_fixture(const std::filesystem::path& dir, const FixtureSpec& spec) {
  std::filesystem::create_directories(dir);
  Rng rng(spec.seed);
  FixtureFiles files;

  // Grid: 2 x 2 cells, the last one outside the region. Offsets are chosen so the
  // population-weighted mean offset is zero in every epoch.
  const std::vector<double> lats = {30.0, 30.5};
  const std::vector<double> lons = {-98.0, -97.5};
  const double offsets[4] = {3.0, -1.0, 0.0, 10.0};
  const std::map<int, std::vector<double>> population = {
      {2000, {1000, 3000, 0, 50000}}, {2010, {2000, 6000, 0, 50000}}, {2020, {3000, 9000, 0, 60000}}};

  const Date t_first(spec.temp_first_year, 1, 1);
  const Date t_last(spec.temp_last_year, 12, 31);
  thermal::TemperatureGrid grid;
  grid.lats = lats;
  grid.lons = lons;
  grid.mask = {1, 1, 1, 0};
  std::map<long, double> regional;  // population-weighted daily mean as generated
  double anomaly = 0.0;
  for (Date d = t_first; d <= t_last; ++d) {
    anomaly = 0.7 * anomaly + spec.noise * 1.8 * rng.normal();
    const double base = cycle_temperature(d, spec.warming_c_per_year) + anomaly;
    grid.times.push_back({d, 0});
    double cell_noise[4];
    for (double& n : cell_noise) n = spec.noise * 0.4 * rng.symmetric();
    for (std::size_t c = 0; c < 4; ++c) grid.values.push_back(base + offsets[c] + cell_noise[c]);
    const auto& w = std::prev(population.upper_bound(std::max(d.year(), 2000)))->second;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      num += w[c] * (base + offsets[c] + cell_noise[c]);
      den += w[c];
    }
    regional[d.serial()] = num / den;
  }

  files.mask = dir / "mask.csv";
  {
    auto out = detail::open(files.mask);
    out << "lat,lon,in_region\n";
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        out << csv::exact(lats[i]) << ',' << csv::exact(lons[j]) << ',' << int(grid.mask[grid.cell(i, j)]) << '\n';
  }
  files.population = dir / "population.csv";
  {
    auto out = detail::open(files.population);
    out << "lat,lon,epoch,persons\n";
    for (const auto& [epoch, w] : population)
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
          out << csv::exact(lats[i]) << ',' << csv::exact(lons[j]) << ',' << epoch << ','
              << csv::exact(w[grid.cell(i, j)]) << '\n';
  }
  if (spec.raster) {
    files.grid = dir / "grid.axes";
    auto side = detail::open(files.grid);
    auto payload = detail::open(dir / "grid.bin");
    thermal::write_grid_raster(side, payload, grid);
  } else {
    files.grid = dir / "grid.csv";
    auto out = detail::open(files.grid);
    thermal::write_grid_csv(out, grid);
  }

  // Hourly load from the cubic and the regional temperature.
  const auto absent = [&](int y) {
    return std::find(spec.load_absent_years.begin(), spec.load_absent_years.end(), y) !=
           spec.load_absent_years.end();
  };
  std::vector<ingest::HourlyLoadRecord> load;
  for (Date d(spec.load_first_year, 1, 1); d <= Date(spec.load_last_year, 12, 31); ++d) {
    if (absent(d.year())) continue;
    const auto it = regional.find(d.serial());
    if (it == regional.end()) throw std::invalid_argument("load years must lie inside temperature years");
    const double peak = demand_mw(it->second) * (1.0 + spec.noise * 0.005 * rng.symmetric());
    // an occasional outage in metering leaves a partial day
    const bool partial = spec.noise > 0.0 && rng.uniform() < 0.003;
    for (int h = 0; h < 24; ++h) {
      if (partial && h >= 8 && h < 14) continue;
      const double v = peak * hourly_shape(h) * (1.0 + spec.noise * 0.002 * rng.symmetric());
      load.push_back({{d, h * 60}, v});
    }
  }
  files.load = dir / "load.csv";
  {
    auto out = detail::open(files.load);
    ingest::write_hourly_load(out, load);
  }
  std::map<long long, double> load_by_hour;
  for (const auto& r : load) load_by_hour[r.timestamp.minutes() / 60] = r.load_mw;

  // Quarter-hour wind, solar and hydro.
  std::vector<ingest::FuelMixRecord> mix;
  for (Date d(spec.mix_first_year, 1, 1); d <= Date(spec.load_last_year, 12, 31); ++d) {
    const double season = std::sin(2.0 * std::numbers::pi * (d.day_of_year() - 80) / 365.0);
    for (int m = 0; m < 24 * 60; m += 15) {
      const double h = m / 60.0;
      ingest::FuelMixRecord r;
      r.timestamp = {d, m};
      r.wind_mw = std::max(0.0, 6000.0 - 2500.0 * season + spec.noise * 1500.0 * rng.symmetric());
      r.solar_mw = h > 6.0 && h < 19.0 ? 4000.0 * std::sin(std::numbers::pi * (h - 6.0) / 13.0) : 0.0;
      r.hydro_mw = 300.0;
      r.other_mw = 100.0;
      mix.push_back(r);
    }
  }
  files.fuel_mix = dir / "fuel_mix.csv";
  {
    auto out = detail::open(files.fuel_mix);
    ingest::write_fuel_mix(out, mix);
  }

  // Outages: heavier maintenance in the spring and fall shoulders, lighter in winter and summer.
  std::vector<ingest::OutageRecord> outages;
  for (Date d = spec.outage_first; d <= spec.outage_last; ++d) {
    const auto md = d.month() * 100 + d.day();
    const bool shoulder = (md >= 315 && md <= 501) || (md >= 1015 && md <= 1130);
    const bool summer = d.month() >= 6 && d.month() <= 9;
    const double base = shoulder ? 20500.0 : (summer ? 10000.0 : 15000.0);
    for (int m = 0; m < 24 * 60; m += 15) {
      ingest::OutageRecord r;
      r.timestamp = {d, m};
      r.outage_mw = base + spec.noise * 800.0 * rng.symmetric();
      const auto it = load_by_hour.find(r.timestamp.minutes() / 60);
      if (it != load_by_hour.end() && !(spec.noise > 0.0 && rng.uniform() < 0.001)) {
        r.telemetered_output_mw = it->second * (1.0 + spec.noise * 0.02 * rng.symmetric());
      }
      outages.push_back(r);
    }
  }
  files.outages = dir / "outages.csv";
  {
    auto out = detail::open(files.outages);
    ingest::write_outages(out, outages);
  }

  // Ensemble: raw annual means relate to the observed (unweighted) means by
  // observed = 0.92 * raw + 1.0, with a seasonal cycle that averages to zero.
  std::map<int, std::pair<double, int>> obs_acc;
  for (std::size_t t = 0; t < grid.times.size(); ++t) {
    double s = 0.0;
    for (std::size_t c = 0; c < 3; ++c) s += grid.values[t * 4 + c];
    auto& a = obs_acc[grid.times[t].date.year()];
    a.first += s / 3.0;
    ++a.second;
  }
  auto model_mean = [&](int y) {
    return 0.5 * (kWinterLow + kSummerHigh) + spec.warming_c_per_year * (y - kReferenceYear) + 2.0 / 3.0;
  };
  double calib = 0.0;
  for (const auto& [y, a] : obs_acc) calib += a.first / a.second - model_mean(y);
  calib /= static_cast<double>(obs_acc.size());
  files.ensemble = dir / "ensemble.csv";
  {
    auto out = detail::open(files.ensemble);
    out << "member,year,month,t2m_c\n";
    for (int k = 1; k <= spec.ensemble_members; ++k) {
      const std::string member = "m" + std::to_string(k);
      for (int y = spec.ensemble_first_year; y <= spec.ensemble_last_year; ++y) {
        const auto it = obs_acc.find(y);
        const double observed =
            it != obs_acc.end()
                ? it->second.first / it->second.second
                : model_mean(spec.temp_last_year) + calib +
                      spec.future_warming_c_per_year * (y - spec.temp_last_year);
        const double raw = (observed - 1.0) / 0.92 + spec.noise * 0.15 * rng.normal();
        double cycle[12];
        double weighted = 0.0;
        for (unsigned m = 1; m <= 12; ++m) {
          cycle[m - 1] = -9.0 * std::cos(2.0 * std::numbers::pi * (m - 1.0) / 12.0);
          weighted += cycle[m - 1] * days_in_month(y, m);
        }
        weighted /= days_in_year(y);
        for (unsigned m = 1; m <= 12; ++m) {
          out << member << ',' << y << ',' << m << ',' << csv::exact(raw + cycle[m - 1] - weighted) << '\n';
        }
      }
    }
  }

  files.config = dir / "config.txt";
  {
    auto out = detail::open(files.config);
    out << "# synthetic fixture, seed " << spec.seed << "\n"
        << "region = synthetic\n"
        << "load_file = load.csv\n"
        << "fuel_mix_file = fuel_mix.csv\n"
        << (spec.raster ? "grid_raster_file = grid.axes\n" : "grid_file = grid.csv\n")
        << "mask_file = mask.csv\n"
        << "population_file = population.csv\n"
        << "outage_file = outages.csv\n"
        << "ensemble_file = ensemble.csv\n"
        << "output_dir = out\n"
        << "bias_overlap_start = " << spec.temp_first_year << "\n"
        << "bias_overlap_end = " << spec.temp_last_year << "\n";
  }
  return files;
}

}  // namespace shoulder::fixture
