#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "shoulder/csv.hpp"
#include "shoulder/date.hpp"
#include "shoulder/series.hpp"

namespace shoulder::windows {

enum class Season { spring, fall };
enum class Metric { degree_days, total_energy, peak_demand };

inline std::string_view to_string(Season s) { return s == Season::spring ? "spring" : "fall"; }

inline std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::degree_days: return "degree_days";
    case Metric::total_energy: return "total_energy";
    case Metric::peak_demand: return "peak_demand";
  }
  return "?";
}

inline Season parse_season(std::string_view s) {
  if (s == "spring") return Season::spring;
  if (s == "fall") return Season::fall;
  throw std::invalid_argument("unknown season '" + std::string(s) + "'");
}

inline Metric parse_metric(std::string_view s) {
  if (s == "degree_days") return Metric::degree_days;
  if (s == "total_energy") return Metric::total_energy;
  if (s == "peak_demand") return Metric::peak_demand;
  throw std::invalid_argument("unknown metric '" + std::string(s) + "'");
}

struct ShoulderWindow {
  int year = 0;
  Season season = Season::spring;
  Metric metric = Metric::degree_days;
  Date onset;
  double window_mean = 0.0;
  int days_used = 0;

  [[nodiscard]] int onset_doy() const { return onset.day_of_year(); }
  bool operator==(const ShoulderWindow&) const = default;
};

struct WindowOptions {
  int length = 45;
  int max_missing_days = 3;  // 45-day windows need 42 present days
  bool cross_year = true;    // fall windows may run into the next January

  [[nodiscard]] int min_present() const { return std::max(1, length - max_missing_days); }
};

/// Relative tolerance under which two window means count as tied (earliest onset wins).
inline constexpr double kTieTolerance = 1e-12;

inline bool strictly_lower(double candidate, double best) {
  return candidate < best - kTieTolerance * std::max(1.0, std::abs(best));
}

/// First and last admissible onset day of a half-year.
inline std::pair<Date, Date> half_bounds(int year, Season season) {
  return season == Season::spring ? std::pair{Date(year, 1, 1), Date(year, 6, 30)}
                                  : std::pair{Date(year, 7, 1), Date(year, 12, 31)};
}

/// Lowest-mean window of `options.length` consecutive days whose onset falls in the given
/// half of `year`. Windows may extend beyond the half (and, when `cross_year`, into the next
/// year) but never beyond the end of the series. Missing days inside a window are skipped
/// as long as at least `min_present()` remain.
inline ShoulderWindow min_window(const DailySeries& series, int year, Season season, const WindowOptions& options,
                                 Metric metric = Metric::degree_days) {
  if (options.length < 1) throw std::invalid_argument("window length must be >= 1");
  const auto [half_start, half_end] = half_bounds(year, season);
  const long len = options.length;
  const Date year_end(year, 12, 31);

  std::optional<ShoulderWindow> best;
  if (!series.empty()) {
    // Sliding sums over the span [half_start, half_end + len - 1].
    const Date span_start = half_start;
    const Date span_end = half_end + (len - 1);
    const auto span_len = static_cast<std::size_t>(span_end - span_start) + 1;
    std::vector<long double> prefix(span_len + 1, 0.0L);
    std::vector<int> count(span_len + 1, 0);
    for (std::size_t i = 0; i < span_len; ++i) {
      const double v = series.at(span_start + static_cast<long>(i));
      const bool ok = !std::isnan(v);
      prefix[i + 1] = prefix[i] + (ok ? v : 0.0);
      count[i + 1] = count[i] + (ok ? 1 : 0);
    }
    for (Date onset = half_start; onset <= half_end; ++onset) {
      const Date end = onset + (len - 1);
      if (onset < series.first || end > series.last()) continue;
      if (!options.cross_year && end > year_end) continue;
      const auto i = static_cast<std::size_t>(onset - span_start);
      const int used = count[i + static_cast<std::size_t>(len)] - count[i];
      if (used < options.min_present()) continue;
      const auto mean = static_cast<double>((prefix[i + static_cast<std::size_t>(len)] - prefix[i]) / used);
      if (!best || strictly_lower(mean, best->window_mean)) {
        best = ShoulderWindow{year, season, metric, onset, mean, used};
      }
    }
  }
  if (best) {
    // Report the winner's mean from a direct sum rather than a prefix difference.
    double sum = 0.0;
    for (long k = 0; k < len; ++k) {
      const double v = series.at(best->onset + k);
      if (!std::isnan(v)) sum += v;
    }
    best->window_mean = sum / best->days_used;
  } else {
    throw std::runtime_error("no admissible " + std::to_string(len) + "-day window for " +
                             std::string(to_string(metric)) + " in " + std::string(to_string(season)) + " " +
                             std::to_string(year));
  }
  return *best;
}

/// Per-year spring and fall windows for every supplied metric series. Years with no data in a
/// half are absent from the output.
struct ShoulderInputs {
  const DailySeries* degree_days = nullptr;
  const DailySeries* total_energy = nullptr;
  const DailySeries* peak_demand = nullptr;
};

inline std::vector<ShoulderWindow> shoulder_table(const ShoulderInputs& inputs, std::span<const int> years,
                                                  const WindowOptions& options) {
  std::vector<ShoulderWindow> rows;
  const std::pair<Metric, const DailySeries*> metrics[] = {{Metric::degree_days, inputs.degree_days},
                                                           {Metric::total_energy, inputs.total_energy},
                                                           {Metric::peak_demand, inputs.peak_demand}};
  for (const auto& [metric, series] : metrics) {
    if (series == nullptr) continue;
    for (int year : years) {
      for (Season season : {Season::spring, Season::fall}) {
        const bool has = season == Season::spring ? series->has_data_in(year, 1, 6) : series->has_data_in(year, 7, 12);
        if (!has) continue;
        rows.push_back(min_window(*series, year, season, options, metric));
      }
    }
  }
  return rows;
}

inline void write_shoulder_table(std::ostream& out, std::span<const ShoulderWindow> rows) {
  out << "year,season,metric,onset_date,onset_doy,window_mean,days_used\n";
  for (const auto& r : rows) {
    out << r.year << ',' << to_string(r.season) << ',' << to_string(r.metric) << ',' << r.onset.iso() << ','
        << r.onset_doy() << ',' << csv::exact(r.window_mean) << ',' << r.days_used << '\n';
  }
}

inline std::vector<ShoulderWindow> parse_shoulder_table(std::istream& in) {
  csv::Reader r(in, {"year", "season", "metric", "onset_date", "onset_doy", "window_mean", "days_used"});
  std::vector<ShoulderWindow> rows;
  while (r.next()) {
    ShoulderWindow w;
    try {
      w.year = static_cast<int>(r.integer(0));
      w.season = parse_season(r.field(1));
      w.metric = parse_metric(r.field(2));
      w.onset = Date::parse(r.field(3));
    } catch (const std::invalid_argument& e) {
      throw ParseError(r.line(), e.what());
    }
    if (w.onset_doy() != r.integer(4)) throw ParseError(r.line(), "onset_doy does not match onset_date");
    w.window_mean = r.number(5);
    w.days_used = static_cast<int>(r.integer(6));
    rows.push_back(w);
  }
  return rows;
}

}  // namespace shoulder::windows
