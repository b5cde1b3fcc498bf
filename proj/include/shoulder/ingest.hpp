#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "shoulder/csv.hpp"
#include "shoulder/date.hpp"
#include "shoulder/series.hpp"

namespace shoulder::ingest {

struct HourlyLoadRecord {
  Timestamp timestamp;  // region-local, whole hour
  double load_mw = 0.0;

  bool operator==(const HourlyLoadRecord&) const = default;
};

struct DailyLoadSummary {
  Date date;
  double total_energy_mwh = 0.0;
  double peak_demand_mw = 0.0;
  int hours_present = 0;

  bool operator==(const DailyLoadSummary&) const = default;
};

struct FuelMixRecord {
  Timestamp timestamp;
  double wind_mw = 0.0;
  double solar_mw = 0.0;
  double hydro_mw = 0.0;
  double other_mw = 0.0;

  [[nodiscard]] double non_thermal_mw() const { return wind_mw + solar_mw + hydro_mw; }
};

struct OutageRecord {
  Timestamp timestamp;
  double outage_mw = 0.0;
  std::optional<double> telemetered_output_mw;

  bool operator==(const OutageRecord&) const = default;
};

namespace detail {

inline double non_negative(const csv::Reader& r, std::size_t col) {
  const double v = r.number(col);
  if (!std::isfinite(v)) {
    throw ParseError(r.line(), "column '" + r.column(col) + "' is not finite");
  }
  if (v < 0.0) {
    throw ParseError(r.line(), "column '" + r.column(col) + "' is negative (" + csv::exact(v) + ")");
  }
  return v;
}

inline Date date_field(const csv::Reader& r, std::size_t col) {
  try {
    return Date::parse(r.field(col));
  } catch (const std::invalid_argument& e) {
    throw ParseError(r.line(), e.what());
  }
}

inline Timestamp timestamp_field(const csv::Reader& r, std::size_t col) {
  try {
    return Timestamp::parse(r.field(col));
  } catch (const std::invalid_argument& e) {
    throw ParseError(r.line(), e.what());
  }
}

inline void check_order(const Timestamp& prev, const Timestamp& cur, std::size_t line) {
  if (cur == prev) throw ParseError(line, "duplicate timestamp " + cur.iso());
  if (cur < prev) throw ParseError(line, "timestamp " + cur.iso() + " is out of order");
}

}  // namespace detail

/// Reads `date,hour,load_mw`. Rows must be strictly increasing in time.
inline std::vector<HourlyLoadRecord> parse_hourly_load(std::istream& in) {
  csv::Reader r(in, {"date", "hour", "load_mw"});
  std::vector<HourlyLoadRecord> out;
  while (r.next()) {
    HourlyLoadRecord rec;
    rec.timestamp.date = detail::date_field(r, 0);
    const long hour = r.integer(1);
    if (hour < 0 || hour > 23) throw ParseError(r.line(), "hour must be in 0..23");
    rec.timestamp.minute_of_day = static_cast<int>(hour) * 60;
    rec.load_mw = detail::non_negative(r, 2);
    if (!out.empty()) detail::check_order(out.back().timestamp, rec.timestamp, r.line());
    out.push_back(rec);
  }
  return out;
}

inline void write_hourly_load(std::ostream& out, std::span<const HourlyLoadRecord> records) {
  out << "date,hour,load_mw\n";
  for (const auto& r : records) {
    out << r.timestamp.date.iso() << ',' << r.timestamp.hour() << ',' << csv::exact(r.load_mw) << '\n';
  }
}

/// One summary per calendar day present. Input must be sorted by timestamp.
inline std::vector<DailyLoadSummary> aggregate_daily(std::span<const HourlyLoadRecord> hourly) {
  std::vector<DailyLoadSummary> out;
  for (const auto& rec : hourly) {
    if (out.empty() || out.back().date != rec.timestamp.date) {
      out.push_back({rec.timestamp.date, 0.0, 0.0, 0});
    }
    auto& day = out.back();
    day.total_energy_mwh += rec.load_mw;  // MW x 1 h
    day.peak_demand_mw = std::max(day.peak_demand_mw, rec.load_mw);
    ++day.hours_present;
  }
  return out;
}

inline void write_daily_load(std::ostream& out, std::span<const DailyLoadSummary> days) {
  out << "date,total_energy_mwh,peak_demand_mw,hours_present\n";
  for (const auto& d : days) {
    out << d.date.iso() << ',' << csv::exact(d.total_energy_mwh) << ',' << csv::exact(d.peak_demand_mw)
        << ',' << d.hours_present << '\n';
  }
}

inline std::vector<DailyLoadSummary> parse_daily_load(std::istream& in) {
  csv::Reader r(in, {"date", "total_energy_mwh", "peak_demand_mw", "hours_present"});
  std::vector<DailyLoadSummary> out;
  while (r.next()) {
    DailyLoadSummary d;
    d.date = detail::date_field(r, 0);
    d.total_energy_mwh = detail::non_negative(r, 1);
    d.peak_demand_mw = detail::non_negative(r, 2);
    const long h = r.integer(3);
    if (h < 0 || h > 24) throw ParseError(r.line(), "hours_present must be in 0..24");
    d.hours_present = static_cast<int>(h);
    if (!out.empty() && d.date <= out.back().date) throw ParseError(r.line(), "dates must increase");
    out.push_back(d);
  }
  return out;
}

enum class LoadMetric { total_energy, peak_demand };

/// Daily series of one load metric; days with fewer than `min_hours` hours are left missing.
inline DailySeries load_series(std::span<const DailyLoadSummary> days, LoadMetric metric, int min_hours) {
  std::vector<std::pair<Date, double>> pairs;
  for (const auto& d : days) {
    if (d.hours_present < min_hours) continue;
    pairs.emplace_back(d.date, metric == LoadMetric::total_energy ? d.total_energy_mwh : d.peak_demand_mw);
  }
  return DailySeries::from_pairs(pairs);
}

/// Reads `timestamp,wind_mw,solar_mw,hydro_mw,other_mw` at 15-minute resolution.
inline std::vector<FuelMixRecord> parse_fuel_mix(std::istream& in) {
  csv::Reader r(in, {"timestamp", "wind_mw", "solar_mw", "hydro_mw", "other_mw"});
  std::vector<FuelMixRecord> out;
  while (r.next()) {
    FuelMixRecord rec;
    rec.timestamp = detail::timestamp_field(r, 0);
    if (rec.timestamp.minute_of_day % 15 != 0) {
      throw ParseError(r.line(), "timestamp " + rec.timestamp.iso() + " is not on a 15-minute boundary");
    }
    rec.wind_mw = detail::non_negative(r, 1);
    rec.solar_mw = detail::non_negative(r, 2);
    rec.hydro_mw = detail::non_negative(r, 3);
    rec.other_mw = detail::non_negative(r, 4);
    if (!out.empty()) detail::check_order(out.back().timestamp, rec.timestamp, r.line());
    out.push_back(rec);
  }
  return out;
}

inline void write_fuel_mix(std::ostream& out, std::span<const FuelMixRecord> records) {
  out << "timestamp,wind_mw,solar_mw,hydro_mw,other_mw\n";
  for (const auto& r : records) {
    out << r.timestamp.iso() << ',' << csv::exact(r.wind_mw) << ',' << csv::exact(r.solar_mw) << ','
        << csv::exact(r.hydro_mw) << ',' << csv::exact(r.other_mw) << '\n';
  }
}

/// Removes wind + solar + hydro generation from each hourly load, floored at zero.
/// Quarter-hour mix values within an hour are averaged (MW is a rate).
inline std::vector<HourlyLoadRecord> net_non_thermal(std::span<const HourlyLoadRecord> hourly,
                                                     std::span<const FuelMixRecord> mix) {
  std::map<long long, std::pair<double, int>> per_hour;  // hour key -> (sum, count)
  for (const auto& m : mix) {
    const long long key = m.timestamp.minutes() / 60;
    auto& acc = per_hour[key];
    acc.first += m.non_thermal_mw();
    ++acc.second;
  }
  std::vector<HourlyLoadRecord> out;
  out.reserve(hourly.size());
  for (const auto& rec : hourly) {
    const auto it = per_hour.find(rec.timestamp.minutes() / 60);
    if (it == per_hour.end()) {
      throw ParseError(0, "missing fuel-mix coverage for " + rec.timestamp.iso());
    }
    const double non_thermal = it->second.first / it->second.second;
    out.push_back({rec.timestamp, std::max(0.0, rec.load_mw - non_thermal)});
  }
  return out;
}

/// Reads `timestamp,outage_mw,telemetered_output_mw`; the last column may be empty.
inline std::vector<OutageRecord> parse_outages(std::istream& in) {
  csv::Reader r(in, {"timestamp", "outage_mw", "telemetered_output_mw"});
  std::vector<OutageRecord> out;
  while (r.next()) {
    OutageRecord rec;
    rec.timestamp = detail::timestamp_field(r, 0);
    if (rec.timestamp.minute_of_day % 15 != 0) {
      throw ParseError(r.line(), "timestamp " + rec.timestamp.iso() + " is not on a 15-minute boundary");
    }
    rec.outage_mw = detail::non_negative(r, 1);
    if (!r.field(2).empty()) rec.telemetered_output_mw = detail::non_negative(r, 2);
    if (!out.empty()) detail::check_order(out.back().timestamp, rec.timestamp, r.line());
    out.push_back(rec);
  }
  return out;
}

inline void write_outages(std::ostream& out, std::span<const OutageRecord> records) {
  out << "timestamp,outage_mw,telemetered_output_mw\n";
  for (const auto& r : records) {
    out << r.timestamp.iso() << ',' << csv::exact(r.outage_mw) << ','
        << (r.telemetered_output_mw ? csv::exact(*r.telemetered_output_mw) : std::string{}) << '\n';
  }
}

}  // namespace shoulder::ingest
