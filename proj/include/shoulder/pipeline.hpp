#pragma once

// Stage orchestration. Every stage reads its upstream inputs from files in the output
// directory, so a stage run on its own from cached outputs sees exactly what a full run sees.

#include <algorithm>
#include <array>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "shoulder/adequacy.hpp"
#include "shoulder/config.hpp"
#include "shoulder/csv.hpp"
#include "shoulder/date.hpp"
#include "shoulder/ingest.hpp"
#include "shoulder/projection.hpp"
#include "shoulder/series.hpp"
#include "shoulder/thermal.hpp"
#include "shoulder/trends.hpp"
#include "shoulder/windows.hpp"

namespace shoulder::pipeline {

namespace fs = std::filesystem;

enum class Stage { ingest, thermal, shoulder, trends, project, adequacy, report };

inline constexpr std::array kStageOrder = {Stage::ingest,  Stage::thermal,  Stage::shoulder, Stage::trends,
                                           Stage::project, Stage::adequacy, Stage::report};

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::ingest: return "ingest";
    case Stage::thermal: return "thermal";
    case Stage::shoulder: return "shoulder";
    case Stage::trends: return "trends";
    case Stage::project: return "project";
    case Stage::adequacy: return "adequacy";
    case Stage::report: return "report";
  }
  return "?";
}

inline std::optional<Stage> parse_stage(std::string_view name) {
  for (Stage s : kStageOrder) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

/// A stage could not run: missing upstream output, unreadable input or failed analysis.
class StageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Output file names.
inline constexpr const char* kDailyLoad = "daily_load.csv";
inline constexpr const char* kDailyLoadNet = "daily_load_net.csv";
inline constexpr const char* kRegionalTemperature = "regional_temperature.csv";
inline constexpr const char* kCubicFits = "cubic_fits.csv";
inline constexpr const char* kDegreeDays = "degree_days.csv";
inline constexpr const char* kAnnualTemperature = "annual_temperature.csv";
inline constexpr const char* kSpatialSpread = "spatial_spread.csv";
inline constexpr const char* kThermalSummary = "thermal_summary.csv";
inline constexpr const char* kShoulderWindows = "shoulder_windows.csv";
inline constexpr const char* kTrends = "trends.csv";
inline constexpr const char* kWindowMeanTrends = "window_mean_trends.csv";
inline constexpr const char* kCorrelations = "correlations.csv";
inline constexpr const char* kEnsembleStats = "ensemble_stats.csv";
inline constexpr const char* kBiasCorrection = "bias_correction.csv";
inline constexpr const char* kOnsetTemperature = "onset_temperature.csv";
inline constexpr const char* kProjection = "projection.csv";
inline constexpr const char* kOutagePeriods = "outage_periods.csv";
inline constexpr const char* kOutageSummary = "outage_summary.csv";
inline constexpr const char* kUnmetDemand = "unmet_demand.csv";
inline constexpr const char* kReport = "report.txt";

struct Context {
  RunConfig config = RunConfig::defaults();
  fs::path out_dir = "out";
  bool verbose = false;
  std::ostream* log = &std::cerr;

  void info(const std::string& msg) const {
    if (verbose && log) *log << msg << '\n';
  }
  void warn(const std::string& msg) const {
    if (log) *log << "warning: " << msg << '\n';
  }
};

/// Output directory from the config unless overridden on the command line.
inline Context make_context(RunConfig config, const std::optional<fs::path>& out_override = std::nullopt) {
  Context ctx;
  ctx.out_dir = out_override ? *out_override : *config.path("output_dir");
  ctx.config = std::move(config);
  return ctx;
}

namespace detail {

/// Write-then-rename so readers never observe a half-written table.
inline void write_atomic(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StageError("cannot write " + tmp.string());
    body(out);
    out.flush();
    if (!out) throw StageError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

template <class Parse>
auto read_file(const fs::path& path, Parse&& parse) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StageError("cannot open " + path.string());
  try {
    return parse(in);
  } catch (const ParseError& e) {
    throw StageError(path.filename().string() + ": " + e.what());
  }
}

inline fs::path upstream(const Context& ctx, const char* file, Stage producer, Stage consumer) {
  fs::path p = ctx.out_dir / file;
  if (!fs::exists(p)) {
    throw StageError("stage '" + std::string(to_string(consumer)) + "' needs " + file + " from stage '" +
                     std::string(to_string(producer)) + "'; run that stage first");
  }
  return p;
}

inline std::string slug(std::string_view label) {
  std::string out;
  for (char c : label) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

inline std::string join_years(const std::vector<int>& years, char sep = ';') {
  std::string out;
  for (std::size_t i = 0; i < years.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(years[i]);
  }
  return out;
}

inline std::vector<ingest::DailyLoadSummary> read_daily_load(const fs::path& p) {
  return read_file(p, [](std::istream& in) { return ingest::parse_daily_load(in); });
}

inline DailySeries read_degree_days(const fs::path& p) {
  return read_file(p, [](std::istream& in) {
    csv::Reader r(in, {"date", "t_avg_c", "degree_days"});
    std::vector<std::pair<Date, double>> pairs;
    while (r.next()) {
      try {
        pairs.emplace_back(Date::parse(r.field(0)), r.number(2));
      } catch (const std::invalid_argument& e) {
        throw ParseError(r.line(), e.what());
      }
    }
    return DailySeries::from_pairs(pairs);
  });
}

inline std::map<int, double> read_annual_temperature(const fs::path& p) {
  return read_file(p, [](std::istream& in) {
    csv::Reader r(in, {"year", "mean_uniform_c", "mean_population_c"});
    std::map<int, double> out;
    while (r.next()) out[static_cast<int>(r.integer(0))] = r.number(1);
    return out;
  });
}

inline std::vector<windows::ShoulderWindow> read_windows(const fs::path& p) {
  return read_file(p, [](std::istream& in) { return windows::parse_shoulder_table(in); });
}

inline std::map<std::string, std::string> read_key_values(const fs::path& p) {
  return read_file(p, [](std::istream& in) {
    csv::Reader r(in, {"key", "value"});
    std::map<std::string, std::string> out;
    while (r.next()) out[std::string(r.field(0))] = std::string(r.field(1));
    return out;
  });
}

inline thermal::TemperatureGrid load_grid(const RunConfig& cfg) {
  thermal::TemperatureGrid grid;
  if (auto csv_path = cfg.path("grid_file")) {
    grid = read_file(*csv_path, [](std::istream& in) { return thermal::parse_grid_csv(in); });
  } else if (auto sidecar = cfg.path("grid_raster_file")) {
    fs::path payload = *sidecar;
    payload.replace_extension(".bin");
    std::ifstream bin(payload, std::ios::binary);
    if (!bin) throw StageError("cannot open raster payload " + payload.string());
    grid = read_file(*sidecar, [&](std::istream& side) { return thermal::read_grid_raster(side, bin); });
  } else {
    throw ConfigError("grid_file", "required by stage 'thermal' (or set grid_raster_file)");
  }
  const auto mask = cfg.required_path("mask_file");
  read_file(mask, [&](std::istream& in) {
    thermal::apply_region_mask(in, grid);
    return 0;
  });
  try {
    grid.validate();
  } catch (const ParseError& e) {
    throw StageError(std::string("temperature grid: ") + e.what());
  }
  return grid;
}

}  // namespace detail

// ---------------------------------------------------------------------------------------------

inline void run_ingest(const Context& ctx) {
  const auto& cfg = ctx.config;
  const auto load_path = cfg.required_path("load_file");
  const auto hourly = detail::read_file(load_path, [](std::istream& in) { return ingest::parse_hourly_load(in); });
  if (hourly.empty()) throw StageError(load_path.filename().string() + ": no load records");
  const auto daily = ingest::aggregate_daily(hourly);
  detail::write_atomic(ctx.out_dir / kDailyLoad, [&](std::ostream& out) { ingest::write_daily_load(out, daily); });
  ctx.info("ingest: " + std::to_string(hourly.size()) + " hourly records, " + std::to_string(daily.size()) + " days");

  if (cfg.flag("use_net_load") && !cfg.has("fuel_mix_file")) {
    throw ConfigError("use_net_load", "requires fuel_mix_file");
  }
  if (const auto mix_path = cfg.path("fuel_mix_file")) {
    const auto mix = detail::read_file(*mix_path, [](std::istream& in) { return ingest::parse_fuel_mix(in); });
    if (mix.empty()) throw StageError(mix_path->filename().string() + ": no fuel-mix records");
    // Net load is only defined where the fuel mix reports.
    const long long first_hour = mix.front().timestamp.minutes() / 60;
    const long long last_hour = mix.back().timestamp.minutes() / 60;
    std::vector<ingest::HourlyLoadRecord> covered;
    for (const auto& r : hourly) {
      const long long h = r.timestamp.minutes() / 60;
      if (h >= first_hour && h <= last_hour) covered.push_back(r);
    }
    std::vector<ingest::HourlyLoadRecord> net;
    try {
      net = ingest::net_non_thermal(covered, mix);
    } catch (const ParseError& e) {
      throw StageError(mix_path->filename().string() + ": " + e.what());
    }
    const auto net_daily = ingest::aggregate_daily(net);
    detail::write_atomic(ctx.out_dir / kDailyLoadNet,
                         [&](std::ostream& out) { ingest::write_daily_load(out, net_daily); });
    ctx.info("ingest: net load for " + std::to_string(net_daily.size()) + " days");
  }
}

inline void run_thermal(const Context& ctx) {
  const auto& cfg = ctx.config;
  const auto grid = detail::load_grid(cfg);
  const auto pop_path = cfg.required_path("population_file");
  const auto pop = detail::read_file(pop_path, [&](std::istream& in) { return thermal::parse_population(in, grid); });
  if (grid.times.empty()) throw StageError("temperature grid has no time steps");
  const Date from = grid.times.front().date;
  const Date to = grid.times.back().date;

  std::vector<thermal::DailyRegionTemp> weighted;
  std::vector<thermal::DailyRegionTemp> uniform;
  try {
    weighted = thermal::regional_daily_temp(grid, &pop, thermal::Weighting::population, from, to);
    uniform = thermal::regional_daily_temp(grid, nullptr, thermal::Weighting::uniform, from, to);
  } catch (const ParseError& e) {
    throw StageError(std::string("thermal: ") + e.what());
  }

  std::vector<thermal::CubicDemandFit> fits;
  const fs::path daily_path = ctx.out_dir / kDailyLoad;
  if (fs::exists(daily_path)) {
    const auto daily = detail::read_daily_load(daily_path);
    try {
      fits = thermal::yearly_cubic_fits(weighted, daily, cfg.integer("partial_day_min_hours"));
    } catch (const std::exception& e) {
      throw StageError(std::string("thermal: cubic fit failed: ") + e.what());
    }
  } else if (!cfg.has("t0_c")) {
    throw StageError("stage 'thermal' needs daily_load.csv from stage 'ingest' to derive the reference "
                     "temperature; run 'ingest' first or set t0_c");
  }

  double t0 = 0.0;
  std::string source;
  if (cfg.has("t0_c")) {
    t0 = cfg.number("t0_c");
    source = "config";
  } else {
    if (fits.empty()) throw StageError("thermal: no year has enough paired temperature and load days for a cubic fit");
    t0 = thermal::global_t0(fits);
    source = "yearly_fits";
  }
  ctx.info("thermal: T0 = " + csv::fixed(t0, 3) + " degC from " + source);

  const auto dd = thermal::degree_day_series(weighted, t0);
  const auto spread = thermal::spatial_temp_stddev(grid, from, to);
  const auto annual_uniform = thermal::annual_mean_temperature(uniform);
  const auto annual_weighted = thermal::annual_mean_temperature(weighted);

  detail::write_atomic(ctx.out_dir / kRegionalTemperature, [&](std::ostream& out) {
    out << "date,t_population_c,t_uniform_c\n";
    for (std::size_t i = 0; i < weighted.size(); ++i) {
      out << weighted[i].date.iso() << ',' << csv::exact(weighted[i].t_avg_c) << ',' << csv::exact(uniform[i].t_avg_c)
          << '\n';
    }
  });
  detail::write_atomic(ctx.out_dir / kCubicFits, [&](std::ostream& out) {
    out << "year,a1,a2,a3,a4,t0_c,t_min_c,t_max_c\n";
    for (const auto& f : fits) {
      out << f.year << ',' << csv::exact(f.a1) << ',' << csv::exact(f.a2) << ',' << csv::exact(f.a3) << ','
          << csv::exact(f.a4) << ',' << csv::exact(f.t0) << ',' << csv::exact(f.t_min) << ',' << csv::exact(f.t_max)
          << '\n';
    }
  });
  detail::write_atomic(ctx.out_dir / kDegreeDays, [&](std::ostream& out) {
    out << "date,t_avg_c,degree_days\n";
    for (const auto& t : weighted) {
      out << t.date.iso() << ',' << csv::exact(t.t_avg_c) << ',' << csv::exact(dd.at(t.date)) << '\n';
    }
  });
  detail::write_atomic(ctx.out_dir / kAnnualTemperature, [&](std::ostream& out) {
    out << "year,mean_uniform_c,mean_population_c\n";
    for (const auto& [year, mean] : annual_uniform) {
      out << year << ',' << csv::exact(mean) << ',' << csv::exact(annual_weighted.at(year)) << '\n';
    }
  });
  detail::write_atomic(ctx.out_dir / kSpatialSpread, [&](std::ostream& out) {
    out << "date,std_c\n";
    for (const auto& [d, sd] : spread.per_day) out << d.iso() << ',' << csv::exact(sd) << '\n';
  });
  detail::write_atomic(ctx.out_dir / kThermalSummary, [&](std::ostream& out) {
    out << "key,value\n"
        << "t0_c," << csv::exact(t0) << '\n'
        << "t0_source," << source << '\n'
        << "fit_years," << fits.size() << '\n'
        << "first_date," << from.iso() << '\n'
        << "last_date," << to.iso() << '\n'
        << "masked_cells," << grid.masked_cells() << '\n'
        << "spatial_std_mean_c," << csv::exact(spread.mean) << '\n';
  });
}

inline void run_shoulder(const Context& ctx) {
  const auto& cfg = ctx.config;
  const auto dd = detail::read_degree_days(detail::upstream(ctx, kDegreeDays, Stage::thermal, Stage::shoulder));

  std::optional<DailySeries> energy;
  std::optional<DailySeries> peak;
  if (cfg.has("load_file")) {
    const bool net = cfg.flag("use_net_load");
    const auto days = detail::read_daily_load(
        detail::upstream(ctx, net ? kDailyLoadNet : kDailyLoad, Stage::ingest, Stage::shoulder));
    const int min_hours = cfg.integer("partial_day_min_hours");
    energy = ingest::load_series(days, ingest::LoadMetric::total_energy, min_hours);
    peak = ingest::load_series(days, ingest::LoadMetric::peak_demand, min_hours);
  }

  windows::WindowOptions opt;
  opt.length = cfg.integer("window_length");
  opt.max_missing_days = cfg.integer("max_missing_days");
  opt.cross_year = cfg.flag("cross_year_windows");

  std::set<int> years;
  const DailySeries* all_series[] = {&dd, energy ? &*energy : nullptr, peak ? &*peak : nullptr};
  for (const DailySeries* s : all_series) {
    if (s == nullptr || s->empty()) continue;
    for (int y = s->first.year(); y <= s->last().year(); ++y) years.insert(y);
  }

  std::vector<windows::ShoulderWindow> rows;
  const std::pair<windows::Metric, const DailySeries*> metrics[] = {
      {windows::Metric::degree_days, &dd},
      {windows::Metric::total_energy, energy ? &*energy : nullptr},
      {windows::Metric::peak_demand, peak ? &*peak : nullptr}};
  for (const auto& [metric, series] : metrics) {
    if (series == nullptr || series->empty()) continue;
    for (int year : years) {
      for (auto season : {windows::Season::spring, windows::Season::fall}) {
        const bool has =
            season == windows::Season::spring ? series->has_data_in(year, 1, 6) : series->has_data_in(year, 7, 12);
        if (!has) continue;
        try {
          rows.push_back(windows::min_window(*series, year, season, opt, metric));
        } catch (const std::runtime_error& e) {
          ctx.warn(std::string("shoulder: skipped, ") + e.what());
        }
      }
    }
  }
  detail::write_atomic(ctx.out_dir / kShoulderWindows,
                       [&](std::ostream& out) { windows::write_shoulder_table(out, rows); });
  ctx.info("shoulder: " + std::to_string(rows.size()) + " windows");
}

inline void run_trends(const Context& ctx) {
  const auto& cfg = ctx.config;
  const auto rows = detail::read_windows(detail::upstream(ctx, kShoulderWindows, Stage::shoulder, Stage::trends));
  using Key = std::pair<windows::Metric, windows::Season>;
  std::map<Key, std::map<int, windows::ShoulderWindow>> groups;
  for (const auto& r : rows) groups[{r.metric, r.season}][r.year] = r;

  const int k = cfg.integer("moving_average_k");
  std::ostringstream trend_table;
  std::ostringstream mean_table;
  trend_table << "metric,season,slope_days_per_decade,stderr_days_per_decade,shift_probability,direction,n,"
                 "excluded_years\n";
  mean_table << "metric,season,slope_per_decade,stderr_per_decade,n\n";
  for (const auto& [key, by_year] : groups) {
    const auto [metric, season] = key;
    const std::string name = std::string(windows::to_string(metric)) + "," + std::string(windows::to_string(season));
    if (by_year.size() < 3) {
      ctx.warn("trends: fewer than 3 years for " + name + ", no trend fitted");
      continue;
    }
    std::vector<trends::Point> onsets;
    std::vector<trends::Point> means;
    for (const auto& [year, w] : by_year) {
      onsets.emplace_back(year, w.onset_doy());
      means.emplace_back(year, w.window_mean);
    }
    trends::OutlierPolicy policy;
    if (metric == windows::Metric::degree_days && season == windows::Season::fall) policy = cfg.outlier_policy();
    const auto tr = trends::robust_trend(onsets, trends::direction_for(season), policy);
    std::vector<int> excluded;
    for (const auto& p : tr.excluded_points) excluded.push_back(static_cast<int>(p.first));
    trend_table << name << ',' << csv::exact(tr.slope_per_decade()) << ',' << csv::exact(tr.stderr_per_decade()) << ','
                << csv::exact(tr.shift_probability) << ','
                << (tr.direction == trends::Direction::earlier ? "earlier" : "later") << ',' << tr.fit.n << ','
                << detail::join_years(excluded) << '\n';

    const auto mean_fit = trends::fit_line(means);
    mean_table << name << ',' << csv::exact(10.0 * mean_fit.slope) << ',' << csv::exact(10.0 * mean_fit.slope_stderr)
               << ',' << mean_fit.n << '\n';

    std::vector<double> xs;
    for (const auto& p : onsets) xs.push_back(p.first);
    const auto band = trends::confidence_band(tr.fit, xs);
    const auto ma = trends::moving_average(onsets, k);
    const std::string plot = "trend_" + std::string(windows::to_string(metric)) + "_" +
                             std::string(windows::to_string(season)) + ".csv";
    detail::write_atomic(ctx.out_dir / plot, [&](std::ostream& out) {
      out << "year,onset_doy,moving_average,fitted,ci_low,ci_high,window_mean,excluded\n";
      for (std::size_t i = 0; i < onsets.size(); ++i) {
        const int year = static_cast<int>(onsets[i].first);
        const bool ex = std::find(excluded.begin(), excluded.end(), year) != excluded.end();
        out << year << ',' << csv::exact(onsets[i].second) << ',' << csv::exact(ma[i].second) << ','
            << csv::exact(band[i].fitted) << ',' << csv::exact(band[i].low) << ',' << csv::exact(band[i].high) << ','
            << csv::exact(means[i].second) << ',' << (ex ? 1 : 0) << '\n';
      }
    });
  }
  detail::write_atomic(ctx.out_dir / kTrends, [&](std::ostream& out) { out << trend_table.str(); });
  detail::write_atomic(ctx.out_dir / kWindowMeanTrends, [&](std::ostream& out) { out << mean_table.str(); });

  // Degree-day onsets against electricity onsets, with the seasonal cutoffs applied to the
  // degree-day side; the two electricity metrics against each other without a cutoff.
  auto onset_map = [&](windows::Metric m, windows::Season s) {
    std::map<int, Date> out;
    const auto it = groups.find({m, s});
    if (it != groups.end()) {
      for (const auto& [year, w] : it->second) out[year] = w.onset;
    }
    return out;
  };
  struct Pairing {
    windows::Metric x;
    windows::Metric y;
    bool cutoff;
  };
  const Pairing pairings[] = {{windows::Metric::degree_days, windows::Metric::total_energy, true},
                              {windows::Metric::degree_days, windows::Metric::peak_demand, true},
                              {windows::Metric::total_energy, windows::Metric::peak_demand, false}};
  detail::write_atomic(ctx.out_dir / kCorrelations, [&](std::ostream& out) {
    out << "x_metric,y_metric,season,r,n_used,cutoff,excluded_years\n";
    for (const auto& p : pairings) {
      for (auto season : {windows::Season::spring, windows::Season::fall}) {
        const auto x = onset_map(p.x, season);
        const auto y = onset_map(p.y, season);
        if (x.empty() || y.empty()) continue;
        trends::MonthDay cutoff = season == windows::Season::spring ? cfg.month_day("spring_cutoff")
                                                                    : cfg.month_day("fall_cutoff");
        if (!p.cutoff) cutoff = season == windows::Season::spring ? trends::MonthDay{1, 1} : trends::MonthDay{12, 31};
        try {
          const auto c = trends::pearson_with_cutoff(x, y, season, cutoff);
          char md[16];
          std::snprintf(md, sizeof md, "%02u-%02u", cutoff.month, cutoff.day);
          out << windows::to_string(p.x) << ',' << windows::to_string(p.y) << ',' << windows::to_string(season) << ','
              << csv::exact(c.r) << ',' << c.n_used << ',' << (p.cutoff ? std::string(md) : std::string("none"))
              << ',' << detail::join_years(c.excluded_years) << '\n';
        } catch (const std::invalid_argument& e) {
          ctx.warn("trends: no correlation for " + std::string(windows::to_string(p.x)) + " vs " +
                   std::string(windows::to_string(p.y)) + " " + std::string(windows::to_string(season)) + ": " +
                   e.what());
        }
      }
    }
  });
}

inline void run_project(const Context& ctx) {
  const auto& cfg = ctx.config;
  const auto observed =
      detail::read_annual_temperature(detail::upstream(ctx, kAnnualTemperature, Stage::thermal, Stage::project));
  const auto rows = detail::read_windows(detail::upstream(ctx, kShoulderWindows, Stage::shoulder, Stage::project));
  const auto ens_path = cfg.required_path("ensemble_file");
  const auto records = detail::read_file(ens_path, [](std::istream& in) { return projection::parse_ensemble(in); });

  std::vector<projection::EnsembleAnnualStats> stats;
  projection::BiasCorrection bias;
  const int overlap_from = cfg.integer("bias_overlap_start");
  const int overlap_to = cfg.integer("bias_overlap_end");
  try {
    stats = projection::ensemble_annual_stats(records);
    bias = projection::fit_bias_correction(observed, stats, overlap_from, overlap_to);
  } catch (const std::invalid_argument& e) {
    throw StageError(std::string("project: ") + e.what());
  }
  if (stats.empty()) throw StageError("project: ensemble has no years");
  int overlap_years = 0;
  for (const auto& s : stats) {
    if (s.year >= overlap_from && s.year <= overlap_to && observed.contains(s.year)) ++overlap_years;
  }
  const auto path = projection::corrected_path(stats, bias);
  ctx.info("project: bias gain " + csv::fixed(bias.gain, 4) + ", offset " + csv::fixed(bias.offset, 4));

  if (observed.empty()) throw StageError("project: no complete observed years");
  const int from = cfg.optional_integer("projection_start").value_or(observed.rbegin()->first + 1);
  const int to = cfg.optional_integer("projection_end").value_or(stats.back().year);
  if (from > to) throw ConfigError("projection_end", "projection range is empty");
  const double sigma = cfg.number("sigma_multiplier");

  std::map<windows::Season, trends::TrendResult> lines;
  std::map<windows::Season, std::vector<projection::OnsetProjection>> projected;
  for (auto season : {windows::Season::spring, windows::Season::fall}) {
    std::map<int, double> doy;
    for (const auto& r : rows) {
      if (r.metric == windows::Metric::degree_days && r.season == season) doy[r.year] = r.onset_doy();
    }
    try {
      lines[season] = projection::onset_vs_temperature(observed, doy, season);
      projected[season] = projection::project_onsets(lines[season].fit, path, from, to, sigma);
    } catch (const std::invalid_argument& e) {
      throw StageError("project: " + std::string(windows::to_string(season)) + ": " + e.what());
    }
  }
  const int persistence = cfg.integer("persistence");
  const auto merge =
      projection::merge_year(projected[windows::Season::spring], projected[windows::Season::fall], persistence);

  detail::write_atomic(ctx.out_dir / kEnsembleStats, [&](std::ostream& out) {
    out << "year,raw_mean_c,raw_std_c,members,corrected_mean_c,corrected_std_c\n";
    for (std::size_t i = 0; i < stats.size(); ++i) {
      out << stats[i].year << ',' << csv::exact(stats[i].mean_c) << ',' << csv::exact(stats[i].std_c) << ','
          << stats[i].n_members << ',' << csv::exact(path[i].mean_c) << ',' << csv::exact(path[i].std_c) << '\n';
    }
  });
  detail::write_atomic(ctx.out_dir / kBiasCorrection, [&](std::ostream& out) {
    out << "gain,offset,overlap_start,overlap_end,overlap_years\n"
        << csv::exact(bias.gain) << ',' << csv::exact(bias.offset) << ',' << overlap_from << ',' << overlap_to << ','
        << overlap_years << '\n';
  });
  detail::write_atomic(ctx.out_dir / kOnsetTemperature, [&](std::ostream& out) {
    out << "season,slope_days_per_degc,intercept,slope_stderr,shift_probability,n\n";
    for (const auto& [season, tr] : lines) {
      out << windows::to_string(season) << ',' << csv::exact(tr.fit.slope) << ',' << csv::exact(tr.fit.intercept)
          << ',' << csv::exact(tr.fit.slope_stderr) << ',' << csv::exact(tr.shift_probability) << ',' << tr.fit.n
          << '\n';
    }
  });
  for (const auto& [season, tr] : lines) {
    std::vector<double> temps;
    std::vector<std::pair<int, double>> obs;
    for (const auto& r : rows) {
      if (r.metric != windows::Metric::degree_days || r.season != season) continue;
      const auto it = observed.find(r.year);
      if (it == observed.end()) continue;
      temps.push_back(it->second);
      obs.emplace_back(r.year, r.onset_doy());
    }
    const auto band = trends::confidence_band(tr.fit, temps);
    detail::write_atomic(ctx.out_dir / ("onset_temperature_" + std::string(windows::to_string(season)) + ".csv"),
                         [&](std::ostream& out) {
                           out << "year,temperature_c,onset_doy,fitted,ci_low,ci_high\n";
                           for (std::size_t i = 0; i < band.size(); ++i) {
                             out << obs[i].first << ',' << csv::exact(temps[i]) << ',' << obs[i].second << ','
                                 << csv::exact(band[i].fitted) << ',' << csv::exact(band[i].low) << ','
                                 << csv::exact(band[i].high) << '\n';
                           }
                         });
  }
  detail::write_atomic(ctx.out_dir / kProjection, [&](std::ostream& out) {
    out << "year,season,predicted_onset_doy,ci_low,ci_high\n";
    for (const auto& [season, proj] : projected) {
      for (const auto& p : proj) {
        out << p.year << ',' << windows::to_string(season) << ',' << csv::exact(p.predicted_onset) << ','
            << csv::exact(p.ci_low) << ',' << csv::exact(p.ci_high) << '\n';
      }
    }
    out << "# merge_year=" << (merge ? std::to_string(*merge) : std::string("none")) << " persistence=" << persistence
        << '\n';
  });
  ctx.info("project: merge year " + (merge ? std::to_string(*merge) : std::string("none")));
}

inline void run_adequacy(const Context& ctx) {
  const auto& cfg = ctx.config;
  const auto windows_rows =
      detail::read_windows(detail::upstream(ctx, kShoulderWindows, Stage::shoulder, Stage::adequacy));
  const auto outage_path = cfg.required_path("outage_file");
  const auto outages = detail::read_file(outage_path, [](std::istream& in) { return ingest::parse_outages(in); });
  if (outages.empty()) throw StageError(outage_path.filename().string() + ": no outage records");
  const auto hourly =
      detail::read_file(cfg.required_path("load_file"), [](std::istream& in) { return ingest::parse_hourly_load(in); });

  const Date covered_from = outages.front().timestamp.date;
  const Date covered_to = outages.back().timestamp.date;
  const int year = cfg.optional_integer("outage_year").value_or(covered_to.year());

  using adequacy::Period;
  std::vector<Period> periods = {
      {"January " + std::to_string(year), Date(year, 1, 1), Date(year, 1, 31)},
      {"March 15-May 1 " + std::to_string(year), Date(year, 3, 15), Date(year, 5, 1)},
      {"October 15-November 30 " + std::to_string(year), Date(year, 10, 15), Date(year, 11, 30)},
      {"December " + std::to_string(year), Date(year, 12, 1), Date(year, 12, 31)},
  };
  const int length = cfg.integer("window_length");
  for (const auto& w : windows_rows) {
    if (w.metric != windows::Metric::peak_demand || w.year != year) continue;
    periods.push_back({"Minimum peak demand " + std::string(windows::to_string(w.season)) + " " + std::to_string(year),
                       w.onset, w.onset + (length - 1)});
  }

  std::vector<adequacy::PeriodOutageStat> table;
  std::vector<Period> included;
  for (const auto& p : periods) {
    if (p.start < covered_from || p.end > covered_to) {
      ctx.warn("adequacy: outage data do not cover " + p.label + " (" + p.start.iso() + " to " + p.end.iso() + ")");
      continue;
    }
    try {
      table.push_back(adequacy::average_outages(outages, p));
      included.push_back(p);
    } catch (const std::invalid_argument& e) {
      ctx.warn(std::string("adequacy: ") + e.what());
    }
  }
  auto gw = [](double v) { return csv::sig(v, 3); };
  detail::write_atomic(ctx.out_dir / kOutagePeriods, [&](std::ostream& out) {
    out << "period,start,end,mean_outage_gw,records\n";
    for (const auto& s : table) {
      out << s.label << ',' << s.start.iso() << ',' << s.end.iso() << ',' << gw(s.mean_outage_gw) << ',' << s.records
          << '\n';
    }
  });

  auto find = [&](const std::string& prefix) -> const adequacy::PeriodOutageStat* {
    for (const auto& s : table) {
      if (s.label.rfind(prefix, 0) == 0) return &s;
    }
    return nullptr;
  };
  detail::write_atomic(ctx.out_dir / kOutageSummary, [&](std::ostream& out) {
    out << "key,value\n";
    const auto* jan = find("January");
    const auto* dec = find("December");
    const auto* spring = find("March 15");
    const auto* fall = find("October 15");
    if (!(jan && dec && spring && fall)) {
      ctx.warn("adequacy: winter or shoulder periods missing, no maintenance delta");
      return;
    }
    const Period winter_p[] = {included[static_cast<std::size_t>(jan - table.data())],
                               included[static_cast<std::size_t>(dec - table.data())]};
    const Period shoulder_p[] = {included[static_cast<std::size_t>(spring - table.data())],
                                 included[static_cast<std::size_t>(fall - table.data())]};
    const double winter = adequacy::combined_average_outages_gw(outages, winter_p);
    const double shoulder = adequacy::combined_average_outages_gw(outages, shoulder_p);
    const double winter_pm = 0.5 * (jan->mean_outage_gw + dec->mean_outage_gw);
    const double shoulder_pm = 0.5 * (spring->mean_outage_gw + fall->mean_outage_gw);
    out << "winter_mean_gw," << gw(winter) << '\n'
        << "winter_mean_of_periods_gw," << gw(winter_pm) << '\n'
        << "shoulder_mean_gw," << gw(shoulder) << '\n'
        << "shoulder_mean_of_periods_gw," << gw(shoulder_pm) << '\n'
        << "maintenance_delta_gw," << gw(adequacy::incremental_maintenance_delta(shoulder, winter)) << '\n'
        << "maintenance_delta_of_periods_gw," << gw(adequacy::incremental_maintenance_delta(shoulder_pm, winter_pm))
        << '\n';
  });

  const double extra_mw = cfg.number("extra_outage_gw") * adequacy::kMwPerGw;
  auto months = cfg.unmet_months();
  const bool explicit_months = !months.empty();
  if (!explicit_months) {
    for (int y = covered_from.year(); y <= covered_to.year(); ++y) {
      for (unsigned m : {1u, 12u}) {
        if (Date(y, m, 1) >= Date(covered_from.year(), covered_from.month(), 1) && Date(y, m, 1) <= covered_to) {
          months.emplace_back(y, m);
        }
      }
    }
  }
  std::vector<adequacy::AdequacyResult> unmet;
  for (const auto& [y, m] : months) {
    try {
      unmet.push_back(adequacy::monthly_unmet(outages, hourly, y, m, extra_mw));
    } catch (const std::invalid_argument& e) {
      if (explicit_months) throw StageError(std::string("adequacy: ") + e.what());
      ctx.warn(std::string("adequacy: ") + e.what());
    }
  }
  detail::write_atomic(ctx.out_dir / kUnmetDemand, [&](std::ostream& out) {
    out << "month,max_output_gw,extra_outage_gw,pct_unmet\n";
    for (const auto& u : unmet) {
      out << u.label << ',' << gw(u.max_output_gw) << ',' << gw(u.extra_outage_gw) << ',' << csv::fixed(u.pct_unmet, 1)
          << '\n';
    }
  });

  const double bin = cfg.number("histogram_bin_gw");
  for (const auto& p : included) {
    std::vector<double> output;
    for (const auto& r : outages) {
      if (p.contains(r.timestamp.date) && r.telemetered_output_mw) output.push_back(*r.telemetered_output_mw / 1000.0);
    }
    double peak = -1.0;
    for (const auto& r : hourly) {
      if (p.contains(r.timestamp.date)) peak = std::max(peak, r.load_mw / 1000.0);
    }
    if (output.empty() || peak < 0.0) {
      ctx.warn("adequacy: no telemetry or load for histogram of " + p.label);
      continue;
    }
    const auto h = adequacy::generation_histogram(output, bin, peak);
    detail::write_atomic(ctx.out_dir / ("histogram_" + detail::slug(p.label) + ".csv"), [&](std::ostream& out) {
      out << "# period=" << p.label << ",start=" << p.start.iso() << ",end=" << p.end.iso()
          << ",max_output_gw=" << gw(h.max_output) << ",peak_demand_gw=" << gw(h.peak_demand)
          << ",headroom_gw=" << gw(h.headroom) << ",balanced=" << (h.balanced ? "true" : "false") << '\n';
      out << "bin_low,bin_high,count\n";
      for (std::size_t i = 0; i < h.counts.size(); ++i) {
        const double lo = h.first_edge + static_cast<double>(i) * h.bin_width;
        out << csv::exact(lo) << ',' << csv::exact(lo + h.bin_width) << ',' << h.counts[i] << '\n';
      }
    });
  }
  ctx.info("adequacy: " + std::to_string(table.size()) + " periods, " + std::to_string(unmet.size()) + " months");
}

// ---------------------------------------------------------------------------------------------

namespace detail {

inline std::vector<std::vector<std::string>> read_rows(const fs::path& p) {
  return read_file(p, [](std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (line.empty() || line.front() == '#') continue;
      if (header) {
        header = false;
        continue;
      }
      std::vector<std::string> fields;
      for (auto f : csv::split(line)) fields.emplace_back(f);
      rows.push_back(std::move(fields));
    }
    return rows;
  });
}

inline double num(const std::string& s) { return csv::to_double(s, 0, "value"); }

}  // namespace detail

/// Text digest of whatever stage outputs exist in the output directory.
inline std::string build_report(const Context& ctx) {
  const auto& dir = ctx.out_dir;
  auto has = [&](const char* f) { return fs::exists(dir / f); };
  std::ostringstream out;
  bool any = false;
  out << "Shoulder-season report: " << ctx.config.raw("region") << "\n";

  if (has(kDailyLoad)) {
    any = true;
    const auto days = detail::read_daily_load(dir / kDailyLoad);
    const int min_hours = ctx.config.integer("partial_day_min_hours");
    const auto partial = std::count_if(days.begin(), days.end(), [&](const auto& d) { return d.hours_present < min_hours; });
    out << "\n== Load ==\n";
    if (!days.empty()) {
      out << "days: " << days.size() << " (" << days.front().date.iso() << " to " << days.back().date.iso()
          << "), partial days excluded: " << partial << "\n";
    }
    if (has(kDailyLoadNet)) out << "net load days: " << detail::read_daily_load(dir / kDailyLoadNet).size() << "\n";
  }

  if (has(kThermalSummary)) {
    any = true;
    const auto kv = detail::read_key_values(dir / kThermalSummary);
    out << "\n== Temperature ==\n"
        << "reference temperature T0: " << csv::fixed(detail::num(kv.at("t0_c")), 2) << " degC ("
        << (kv.at("t0_source") == "config" ? "configured" : "mean of " + kv.at("fit_years") + " yearly cubic fits")
        << ")\n"
        << "period: " << kv.at("first_date") << " to " << kv.at("last_date") << ", " << kv.at("masked_cells")
        << " cells in region\n"
        << "mean across-cell temperature std: " << csv::fixed(detail::num(kv.at("spatial_std_mean_c")), 2) << " degC\n";
  }

  if (has(kShoulderWindows)) {
    any = true;
    const auto rows = detail::read_windows(dir / kShoulderWindows);
    std::map<windows::Metric, std::map<int, std::pair<std::string, std::string>>> table;
    for (const auto& r : rows) {
      auto& cell = table[r.metric][r.year];
      char md[16];
      std::snprintf(md, sizeof md, "%02u-%02u", r.onset.month(), r.onset.day());
      (r.season == windows::Season::spring ? cell.first : cell.second) = md;
    }
    out << "\n== Shoulder-season onsets (spring / fall) ==\n";
    for (const auto& [metric, by_year] : table) {
      out << windows::to_string(metric) << ":\n";
      for (const auto& [year, cell] : by_year) {
        out << "  " << year << "  " << (cell.first.empty() ? "  -  " : cell.first) << " / "
            << (cell.second.empty() ? "  -  " : cell.second) << "\n";
      }
    }
  }

  if (has(kTrends)) {
    any = true;
    out << "\n== Onset trends ==\n";
    for (const auto& r : detail::read_rows(dir / kTrends)) {
      // metric,season,slope,stderr,probability,direction,n,excluded
      out << r[0] << " " << r[1] << ": slope " << csv::fixed(detail::num(r[2]), 2) << " days/decade (stderr "
          << csv::fixed(detail::num(r[3]), 2) << "), P(" << r[5] << ") = " << csv::fixed(detail::num(r[4]), 3)
          << ", n = " << r[6];
      if (r.size() > 7 && !r[7].empty()) out << ", excluded: " << r[7];
      out << "\n";
    }
  }
  if (has(kCorrelations)) {
    any = true;
    out << "\n== Onset correlations ==\n";
    for (const auto& r : detail::read_rows(dir / kCorrelations)) {
      out << r[0] << " vs " << r[1] << " " << r[2] << ": r = " << csv::fixed(detail::num(r[3]), 3) << ", n = " << r[4]
          << ", cutoff " << r[5] << "\n";
    }
  }

  if (has(kProjection)) {
    any = true;
    out << "\n== Projection ==\n";
    if (has(kBiasCorrection)) {
      const auto b = detail::read_rows(dir / kBiasCorrection);
      if (!b.empty()) {
        out << "bias correction: observed = " << csv::fixed(detail::num(b[0][0]), 4) << " * ensemble + "
            << csv::fixed(detail::num(b[0][1]), 4) << " (" << b[0][4] << " overlap years)\n";
      }
    }
    if (has(kOnsetTemperature)) {
      for (const auto& r : detail::read_rows(dir / kOnsetTemperature)) {
        out << r[0] << " onset vs annual temperature: " << csv::fixed(detail::num(r[1]), 2) << " days/degC\n";
      }
    }
    std::ifstream in(dir / kProjection);
    std::string line;
    std::string merge = "none";
    while (std::getline(in, line)) {
      const auto pos = line.find("# merge_year=");
      if (pos == 0) merge = line.substr(13);
    }
    out << "merge year: " << merge << "\n";
  }

  if (has(kOutagePeriods)) {
    any = true;
    out << "\n== Outages by period (GW) ==\n";
    for (const auto& r : detail::read_rows(dir / kOutagePeriods)) {
      out << "  " << r[0] << " (" << r[1] << " to " << r[2] << "): " << r[3] << "\n";
    }
    if (has(kOutageSummary)) {
      for (const auto& r : detail::read_rows(dir / kOutageSummary)) out << "  " << r[0] << ": " << r[1] << "\n";
    }
  }
  if (has(kUnmetDemand)) {
    any = true;
    out << "\n== Unmet demand with extra outages ==\n";
    for (const auto& r : detail::read_rows(dir / kUnmetDemand)) {
      out << "  " << r[0] << ": max output " << r[1] << " GW, extra outage " << r[2] << " GW, unmet " << r[3]
          << "% of hours\n";
    }
  }

  if (!any) return "no stages run\n";
  return out.str();
}

inline std::string run_report(const Context& ctx) {
  const auto text = build_report(ctx);
  detail::write_atomic(ctx.out_dir / kReport, [&](std::ostream& out) { out << text; });
  return text;
}

inline void run_stage(const Context& ctx, Stage stage) {
  ctx.info("stage " + std::string(to_string(stage)));
  switch (stage) {
    case Stage::ingest: run_ingest(ctx); break;
    case Stage::thermal: run_thermal(ctx); break;
    case Stage::shoulder: run_shoulder(ctx); break;
    case Stage::trends: run_trends(ctx); break;
    case Stage::project: run_project(ctx); break;
    case Stage::adequacy: run_adequacy(ctx); break;
    case Stage::report: run_report(ctx); break;
  }
}

/// Whether the configuration supplies what a stage needs from outside the output directory.
inline std::optional<std::string> missing_config(const RunConfig& cfg, Stage stage) {
  switch (stage) {
    case Stage::ingest:
      if (!cfg.has("load_file")) return "load_file not set";
      break;
    case Stage::thermal:
      if (!cfg.has("grid_file") && !cfg.has("grid_raster_file")) return "grid_file not set";
      if (!cfg.has("mask_file")) return "mask_file not set";
      if (!cfg.has("population_file")) return "population_file not set";
      break;
    case Stage::project:
      if (!cfg.has("ensemble_file")) return "ensemble_file not set";
      break;
    case Stage::adequacy:
      if (!cfg.has("outage_file")) return "outage_file not set";
      if (!cfg.has("load_file")) return "load_file not set";
      break;
    default: break;
  }
  return std::nullopt;
}

/// Stages whose outputs a stage reads.
inline std::vector<Stage> prerequisites(Stage stage) {
  switch (stage) {
    case Stage::shoulder: return {Stage::thermal};
    case Stage::trends: return {Stage::shoulder};
    case Stage::project: return {Stage::thermal, Stage::shoulder};
    case Stage::adequacy: return {Stage::shoulder};
    default: return {};
  }
}

/// Runs the requested stages in dependency order. With `all`, stages whose inputs are not
/// configured (or whose prerequisites were skipped) are skipped with a note; explicitly
/// requested stages fail instead.
inline void run_pipeline(const Context& ctx, std::vector<Stage> stages, bool all = false) {
  if (all) stages.assign(kStageOrder.begin(), kStageOrder.end());
  std::sort(stages.begin(), stages.end());
  stages.erase(std::unique(stages.begin(), stages.end()), stages.end());
  fs::create_directories(ctx.out_dir);
  std::set<Stage> skipped;
  for (Stage s : stages) {
    auto why = missing_config(ctx.config, s);
    if (all && !why) {
      for (Stage p : prerequisites(s)) {
        if (skipped.contains(p)) why = "stage '" + std::string(to_string(p)) + "' was skipped";
      }
      // thermal derives T0 from ingest output unless it is configured
      if (s == Stage::thermal && skipped.contains(Stage::ingest) && !ctx.config.has("t0_c")) {
        why = "stage 'ingest' was skipped and t0_c is not set";
      }
    }
    if (why) {
      if (all) {
        ctx.info("skipping stage " + std::string(to_string(s)) + ": " + *why);
        skipped.insert(s);
        continue;
      }
      throw ConfigError(why->substr(0, why->find(' ')), "required by stage '" + std::string(to_string(s)) + "'");
    }
    run_stage(ctx, s);
  }
}

}  // namespace shoulder::pipeline
