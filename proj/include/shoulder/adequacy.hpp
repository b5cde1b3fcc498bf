#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "shoulder/date.hpp"
#include "shoulder/ingest.hpp"

namespace shoulder::adequacy {

inline constexpr double kMwPerGw = 1000.0;

/// Closed date interval [start, end].
struct Period {
  std::string label;
  Date start;
  Date end;

  [[nodiscard]] bool contains(Date d) const { return d >= start && d <= end; }
};

struct PeriodOutageStat {
  std::string label;
  Date start;
  Date end;
  double mean_outage_gw = 0.0;
  std::size_t records = 0;
};

inline PeriodOutageStat average_outages(std::span<const ingest::OutageRecord> outages, const Period& period) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : outages) {
    if (!period.contains(r.timestamp.date)) continue;
    sum += r.outage_mw;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("no outage records cover period '" + period.label + "'");
  return {period.label, period.start, period.end, sum / static_cast<double>(n) / kMwPerGw, n};
}

/// Record-weighted mean over the union of several periods (each record counted once).
inline double combined_average_outages_gw(std::span<const ingest::OutageRecord> outages,
                                          std::span<const Period> periods) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : outages) {
    const bool in = std::any_of(periods.begin(), periods.end(),
                                [&](const Period& p) { return p.contains(r.timestamp.date); });
    if (!in) continue;
    sum += r.outage_mw;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("no outage records cover the combined periods");
  return sum / static_cast<double>(n) / kMwPerGw;
}

/// Extra outage capacity attributed to shoulder-season maintenance.
inline double incremental_maintenance_delta(double shoulder_mean_gw, double winter_mean_gw) {
  if (shoulder_mean_gw < 0.0 || winter_mean_gw < 0.0) throw std::invalid_argument("outage means must be >= 0");
  return shoulder_mean_gw - winter_mean_gw;
}

/// Percent of hours whose demand exceeds (max_output - extra_outage). Supply and demand are
/// treated as independent populations, not matched hour by hour.
inline double unmet_demand_fraction(std::span<const double> hourly_demand_mw, double max_output_mw,
                                    double extra_outage_mw) {
  if (hourly_demand_mw.empty()) throw std::invalid_argument("demand series is empty");
  if (extra_outage_mw < 0.0 || max_output_mw < extra_outage_mw) {
    throw std::invalid_argument("require max_output >= extra_outage >= 0");
  }
  const double available = max_output_mw - extra_outage_mw;
  const auto exceed = std::count_if(hourly_demand_mw.begin(), hourly_demand_mw.end(),
                                    [&](double d) { return d > available; });
  return 100.0 * static_cast<double>(exceed) / static_cast<double>(hourly_demand_mw.size());
}

struct AdequacyResult {
  std::string label;  // e.g. "December 2021"
  int year = 0;
  unsigned month = 1;
  double max_output_gw = 0.0;
  double extra_outage_gw = 0.0;
  double pct_unmet = 0.0;
};

inline std::string month_label(int year, unsigned month) {
  static constexpr const char* names[] = {"January", "February", "March",     "April",   "May",      "June",
                                          "July",    "August",   "September", "October", "November", "December"};
  return std::string(names[month - 1]) + " " + std::to_string(year);
}

/// Unmet-demand percentage for one calendar month, using that month's maximum telemetered
/// output as supply. Throws when the month lacks telemetry or load.
inline AdequacyResult monthly_unmet(std::span<const ingest::OutageRecord> telemetry,
                                    std::span<const ingest::HourlyLoadRecord> load, int year, unsigned month,
                                    double extra_outage_mw) {
  auto in_month = [&](Date d) { return d.year() == year && d.month() == month; };
  double max_output = -1.0;
  for (const auto& r : telemetry) {
    if (in_month(r.timestamp.date) && r.telemetered_output_mw) max_output = std::max(max_output, *r.telemetered_output_mw);
  }
  if (max_output < 0.0) throw std::invalid_argument("no telemetered output for " + month_label(year, month));
  std::vector<double> demand;
  for (const auto& r : load) {
    if (in_month(r.timestamp.date)) demand.push_back(r.load_mw);
  }
  if (demand.empty()) throw std::invalid_argument("no hourly demand for " + month_label(year, month));
  return {month_label(year, month), year, month, max_output / kMwPerGw, extra_outage_mw / kMwPerGw,
          unmet_demand_fraction(demand, max_output, extra_outage_mw)};
}

struct Histogram {
  double first_edge = 0.0;
  double bin_width = 1.0;
  std::vector<std::size_t> counts;
  double max_output = 0.0;
  double peak_demand = 0.0;
  double headroom = 0.0;  // max_output - peak_demand
  bool balanced = false;  // peak demand reaches the maximum output

  [[nodiscard]] std::size_t total() const {
    std::size_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }
};

/// Fixed-width histogram of output values annotated with the period's peak demand.
/// Units are whatever the caller passes (the pipeline uses GW).
inline Histogram generation_histogram(std::span<const double> output, double bin_width, double peak_demand) {
  if (output.empty()) throw std::invalid_argument("no generation output in period");
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin width must be > 0");
  const auto [lo, hi] = std::minmax_element(output.begin(), output.end());
  Histogram h;
  h.bin_width = bin_width;
  h.first_edge = std::floor(*lo / bin_width) * bin_width;
  const auto bins = static_cast<std::size_t>(std::floor((*hi - h.first_edge) / bin_width)) + 1;
  h.counts.assign(bins, 0);
  for (double v : output) {
    auto i = static_cast<std::size_t>(std::floor((v - h.first_edge) / bin_width));
    ++h.counts[std::min(i, bins - 1)];
  }
  h.max_output = *hi;
  h.peak_demand = peak_demand;
  h.headroom = h.max_output - peak_demand;
  h.balanced = h.headroom <= 0.0;
  return h;
}

}  // namespace shoulder::adequacy
