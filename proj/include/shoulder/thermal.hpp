#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "shoulder/csv.hpp"
#include "shoulder/date.hpp"
#include "shoulder/ingest.hpp"
#include "shoulder/series.hpp"

namespace shoulder::thermal {

/// 2 m temperature on a regular lat/lon raster. Values are laid out time-major,
/// then latitude, then longitude. Cells absent from the source hold NaN.
struct TemperatureGrid {
  std::vector<double> lats;
  std::vector<double> lons;
  std::vector<Timestamp> times;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;  // one per cell; 1 = inside region

  [[nodiscard]] std::size_t cells() const { return lats.size() * lons.size(); }
  [[nodiscard]] std::size_t cell(std::size_t lat, std::size_t lon) const { return lat * lons.size() + lon; }
  [[nodiscard]] double at(std::size_t t, std::size_t c) const { return values[t * cells() + c]; }
  [[nodiscard]] double& at(std::size_t t, std::size_t c) { return values[t * cells() + c]; }

  [[nodiscard]] std::size_t masked_cells() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  }

  [[nodiscard]] bool hourly() const {
    return std::any_of(times.begin(), times.end(), [](const Timestamp& t) { return t.minute_of_day != 0; }) ||
           (times.size() > 1 && times[0].date == times[1].date);
  }

  /// Throws if the value array is mis-sized or any masked-in cell is non-finite.
  void validate() const {
    if (values.size() != times.size() * cells()) throw ParseError(0, "grid value array has wrong size");
    if (mask.size() != cells()) throw ParseError(0, "grid mask has wrong size");
    for (std::size_t t = 0; t < times.size(); ++t) {
      for (std::size_t c = 0; c < cells(); ++c) {
        if (mask[c] && !std::isfinite(at(t, c))) {
          throw ParseError(0, "masked-in cell (" + csv::exact(lats[c / lons.size()]) + ", " +
                                  csv::exact(lons[c % lons.size()]) + ") has no finite temperature at " +
                                  times[t].iso());
        }
      }
    }
  }
};

namespace detail {

inline std::size_t axis_index(const std::vector<double>& axis, double v, const char* what) {
  const auto it = std::lower_bound(axis.begin(), axis.end(), v);
  if (it == axis.end() || *it != v) {
    throw ParseError(0, std::string(what) + " " + csv::exact(v) + " is not on the temperature grid");
  }
  return static_cast<std::size_t>(it - axis.begin());
}

inline std::vector<double> unique_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline Timestamp parse_time_field(std::string_view f, std::size_t line) {
  try {
    if (f.size() == 10) return Timestamp{Date::parse(f), 0};
    return Timestamp::parse(f);
  } catch (const std::invalid_argument& e) {
    throw ParseError(line, e.what());
  }
}

}  // namespace detail

/// Reads long-format `lat,lon,date,t2m_c`. `date` is `YYYY-MM-DD` for daily grids or
/// `YYYY-MM-DDTHH:MM` for hourly grids. All cells start masked-in; apply a region mask after.
inline TemperatureGrid parse_grid_csv(std::istream& in) {
  csv::Reader r(in, {"lat", "lon", "date", "t2m_c"});
  struct Row {
    double lat, lon;
    Timestamp t;
    double v;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::vector<double> lats, lons;
  std::vector<Timestamp> times;
  while (r.next()) {
    Row row{r.number(0), r.number(1), detail::parse_time_field(r.field(2), r.line()), r.number(3), r.line()};
    if (!std::isfinite(row.lat) || !std::isfinite(row.lon)) throw ParseError(r.line(), "non-finite coordinate");
    lats.push_back(row.lat);
    lons.push_back(row.lon);
    times.push_back(row.t);
    rows.push_back(row);
  }
  TemperatureGrid g;
  g.lats = detail::unique_sorted(std::move(lats));
  g.lons = detail::unique_sorted(std::move(lons));
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  g.times = std::move(times);
  g.values.assign(g.times.size() * g.cells(), kMissing);
  g.mask.assign(g.cells(), 1);
  std::vector<std::uint8_t> seen(g.values.size(), 0);
  for (const auto& row : rows) {
    const auto t = static_cast<std::size_t>(std::lower_bound(g.times.begin(), g.times.end(), row.t) - g.times.begin());
    const auto c = g.cell(detail::axis_index(g.lats, row.lat, "latitude"), detail::axis_index(g.lons, row.lon, "longitude"));
    const std::size_t idx = t * g.cells() + c;
    if (seen[idx]) throw ParseError(row.line, "duplicate grid value for " + row.t.iso());
    seen[idx] = 1;
    g.values[idx] = row.v;
  }
  return g;
}

/// Long-format writer; NaN cells are omitted so the output reparses to the same grid.
inline void write_grid_csv(std::ostream& out, const TemperatureGrid& g) {
  const bool hourly = g.hourly();
  out << "lat,lon,date,t2m_c\n";
  for (std::size_t t = 0; t < g.times.size(); ++t) {
    const std::string when = hourly ? g.times[t].iso() : g.times[t].date.iso();
    for (std::size_t i = 0; i < g.lats.size(); ++i) {
      for (std::size_t j = 0; j < g.lons.size(); ++j) {
        const double v = g.at(t, g.cell(i, j));
        if (std::isnan(v)) continue;
        out << csv::exact(g.lats[i]) << ',' << csv::exact(g.lons[j]) << ',' << when << ',' << csv::exact(v) << '\n';
      }
    }
  }
}

/// Binary raster: the sidecar declares axes as text; the payload is little-endian
/// IEEE-754 float64 values in time, lat, lon order (NaN for absent cells).
inline void write_grid_raster(std::ostream& sidecar, std::ostream& payload, const TemperatureGrid& g) {
  sidecar << "shoulder-raster 1\n";
  sidecar << "dtype float64le\norder time,lat,lon\n";
  sidecar << "lats " << g.lats.size() << '\n';
  for (double v : g.lats) sidecar << csv::exact(v) << '\n';
  sidecar << "lons " << g.lons.size() << '\n';
  for (double v : g.lons) sidecar << csv::exact(v) << '\n';
  sidecar << "times " << g.times.size() << '\n';
  for (const auto& t : g.times) sidecar << t.iso() << '\n';
  for (double v : g.values) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char bytes[8];
    std::memcpy(bytes, &bits, 8);
    payload.write(bytes, 8);
  }
}

inline TemperatureGrid read_grid_raster(std::istream& sidecar, std::istream& payload) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string {
    if (!std::getline(sidecar, line)) throw ParseError(line_no, "raster sidecar truncated");
    ++line_no;
    return std::string(csv::trim(line));
  };
  if (next_line() != "shoulder-raster 1") throw ParseError(line_no, "not a shoulder-raster sidecar");
  if (next_line() != "dtype float64le") throw ParseError(line_no, "unsupported raster dtype");
  if (next_line() != "order time,lat,lon") throw ParseError(line_no, "unsupported raster order");
  auto count_for = [&](const std::string& key) {
    const std::string l = next_line();
    if (l.rfind(key + " ", 0) != 0) throw ParseError(line_no, "expected '" + key + " <n>'");
    return static_cast<std::size_t>(csv::to_long(std::string_view(l).substr(key.size() + 1), line_no, key));
  };
  TemperatureGrid g;
  for (std::size_t n = count_for("lats"); n > 0; --n) g.lats.push_back(csv::to_double(next_line(), line_no, "lat"));
  for (std::size_t n = count_for("lons"); n > 0; --n) g.lons.push_back(csv::to_double(next_line(), line_no, "lon"));
  for (std::size_t n = count_for("times"); n > 0; --n) g.times.push_back(detail::parse_time_field(next_line(), line_no));
  g.values.resize(g.times.size() * g.cells());
  for (double& v : g.values) {
    char bytes[8];
    if (!payload.read(bytes, 8)) throw ParseError(0, "raster payload truncated");
    std::uint64_t bits = 0;
    std::memcpy(&bits, bytes, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    v = std::bit_cast<double>(bits);
  }
  if (payload.peek() != std::char_traits<char>::eof()) throw ParseError(0, "raster payload has trailing bytes");
  g.mask.assign(g.cells(), 1);
  return g;
}

/// Applies `lat,lon,in_region`. Cells not listed are outside the region.
inline void apply_region_mask(std::istream& in, TemperatureGrid& g) {
  csv::Reader r(in, {"lat", "lon", "in_region"});
  g.mask.assign(g.cells(), 0);
  while (r.next()) {
    const long flag = r.integer(2);
    if (flag != 0 && flag != 1) throw ParseError(r.line(), "in_region must be 0 or 1");
    try {
      const auto c = g.cell(detail::axis_index(g.lats, r.number(0), "latitude"),
                            detail::axis_index(g.lons, r.number(1), "longitude"));
      g.mask[c] = static_cast<std::uint8_t>(flag);
    } catch (const ParseError& e) {
      throw ParseError(r.line(), std::string("region mask not co-registered: ") + e.what());
    }
  }
  if (g.masked_cells() == 0) throw ParseError(0, "region mask selects no cells");
}

/// Population counts per cell for each available epoch year.
struct PopulationGrid {
  std::map<int, std::vector<double>> weights_by_epoch;  // cell-indexed like TemperatureGrid

  /// Nearest previous epoch; years before the first epoch use the first.
  [[nodiscard]] const std::vector<double>& for_year(int year) const {
    if (weights_by_epoch.empty()) throw std::logic_error("population grid has no epochs");
    auto it = weights_by_epoch.upper_bound(year);
    if (it == weights_by_epoch.begin()) return it->second;
    return std::prev(it)->second;
  }
};

/// Reads `lat,lon,epoch,persons` and co-registers it with `grid`. Unlisted cells weigh zero.
inline PopulationGrid parse_population(std::istream& in, const TemperatureGrid& grid) {
  csv::Reader r(in, {"lat", "lon", "epoch", "persons"});
  PopulationGrid pop;
  while (r.next()) {
    const int epoch = static_cast<int>(r.integer(2));
    const double persons = r.number(3);
    if (!std::isfinite(persons) || persons < 0.0) throw ParseError(r.line(), "persons must be finite and >= 0");
    std::size_t c = 0;
    try {
      c = grid.cell(detail::axis_index(grid.lats, r.number(0), "latitude"),
                    detail::axis_index(grid.lons, r.number(1), "longitude"));
    } catch (const ParseError& e) {
      throw ParseError(r.line(), std::string("population grid not co-registered: ") + e.what());
    }
    auto& w = pop.weights_by_epoch[epoch];
    if (w.empty()) w.assign(grid.cells(), 0.0);
    w[c] = persons;
  }
  if (pop.weights_by_epoch.empty()) throw ParseError(0, "population file has no rows");
  return pop;
}

/// Per-cell daily means (mean of the hours present for hourly grids).
struct DailyCellGrid {
  std::vector<Date> dates;
  std::vector<double> values;  // dates x cells
  std::size_t cells = 0;

  [[nodiscard]] double at(std::size_t d, std::size_t c) const { return values[d * cells + c]; }
};

inline DailyCellGrid daily_cell_means(const TemperatureGrid& g) {
  DailyCellGrid out;
  out.cells = g.cells();
  std::vector<double> sum(g.cells());
  std::vector<int> count(g.cells());
  auto flush = [&] {
    for (std::size_t c = 0; c < g.cells(); ++c) {
      out.values.push_back(count[c] ? sum[c] / count[c] : kMissing);
    }
  };
  for (std::size_t t = 0; t < g.times.size(); ++t) {
    if (out.dates.empty() || out.dates.back() != g.times[t].date) {
      if (!out.dates.empty()) flush();
      out.dates.push_back(g.times[t].date);
      std::fill(sum.begin(), sum.end(), 0.0);
      std::fill(count.begin(), count.end(), 0);
    }
    for (std::size_t c = 0; c < g.cells(); ++c) {
      const double v = g.at(t, c);
      if (std::isnan(v)) continue;
      sum[c] += v;
      ++count[c];
    }
  }
  if (!out.dates.empty()) flush();
  return out;
}

struct DailyRegionTemp {
  Date date;
  double t_avg_c = 0.0;
};

enum class Weighting { population, uniform };

/// Regional daily mean temperature over masked-in cells, population-weighted or plain.
inline std::vector<DailyRegionTemp> regional_daily_temp(const TemperatureGrid& grid, const PopulationGrid* pop,
                                                        Weighting weighting, Date from, Date to) {
  const auto daily = daily_cell_means(grid);
  std::vector<DailyRegionTemp> out;
  auto it = std::lower_bound(daily.dates.begin(), daily.dates.end(), from);
  for (Date d = from; d <= to; ++d, ++it) {
    if (it == daily.dates.end() || *it != d) throw ParseError(0, "temperature grid has no data for " + d.iso());
    const auto row = static_cast<std::size_t>(it - daily.dates.begin());
    const std::vector<double>* w = nullptr;
    if (weighting == Weighting::population) {
      if (pop == nullptr) throw std::invalid_argument("population weighting requested without population grid");
      w = &pop->for_year(d.year());
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t c = 0; c < grid.cells(); ++c) {
      if (!grid.mask[c]) continue;
      const double wc = w ? (*w)[c] : 1.0;
      if (wc == 0.0) continue;
      const double v = daily.at(row, c);
      if (!std::isfinite(v)) throw ParseError(0, "masked-in cell has no temperature on " + d.iso());
      num += wc * v;
      den += wc;
    }
    if (den <= 0.0) throw ParseError(0, "zero total population weight inside region mask on " + d.iso());
    out.push_back({d, num / den});
  }
  return out;
}

inline std::vector<DailyRegionTemp> population_weighted_daily_temp(const TemperatureGrid& grid,
                                                                   const PopulationGrid& pop, Date from, Date to) {
  return regional_daily_temp(grid, &pop, Weighting::population, from, to);
}

/// Peak demand vs. daily mean temperature, D = a1 T^3 + a2 T^2 + a3 T + a4.
struct CubicDemandFit {
  int year = 0;
  double a1 = 0.0;  // MW/degC^3
  double a2 = 0.0;  // MW/degC^2
  double a3 = 0.0;  // MW/degC
  double a4 = 0.0;  // MW
  double t0 = kMissing;
  double t_min = -std::numeric_limits<double>::infinity();
  double t_max = std::numeric_limits<double>::infinity();

  [[nodiscard]] double operator()(double t) const { return ((a1 * t + a2) * t + a3) * t + a4; }
};

/// Ordinary least-squares cubic. The abscissa is centered and scaled before solving, and the
/// coefficients are mapped back to raw powers of T.
inline CubicDemandFit fit_demand_temperature_cubic(std::span<const std::pair<double, double>> pairs) {
  std::vector<double> xs;
  xs.reserve(pairs.size());
  for (const auto& [t, d] : pairs) {
    if (!std::isfinite(t) || !std::isfinite(d)) throw std::invalid_argument("cubic fit input must be finite");
    xs.push_back(t);
  }
  const auto distinct = detail::unique_sorted(xs);
  if (distinct.size() < 4) {
    throw std::invalid_argument("cubic fit is rank-deficient: need at least 4 distinct temperatures, got " +
                                std::to_string(distinct.size()));
  }
  const double center = 0.5 * (distinct.front() + distinct.back());
  const double scale = 0.5 * (distinct.back() - distinct.front());

  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd design(n, 4);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = (pairs[static_cast<std::size_t>(i)].first - center) / scale;
    design(i, 0) = 1.0;
    design(i, 1) = u;
    design(i, 2) = u * u;
    design(i, 3) = u * u * u;
    rhs(i) = pairs[static_cast<std::size_t>(i)].second;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 4) throw std::invalid_argument("cubic fit is rank-deficient");
  const Eigen::Vector4d b = qr.solve(rhs);

  // D = sum_k b_k ((T - c)/s)^k  ->  raw power coefficients.
  const double c = center;
  const double s = scale;
  const double b1 = b(1) / s;
  const double b2 = b(2) / (s * s);
  const double b3 = b(3) / (s * s * s);
  CubicDemandFit fit;
  fit.a1 = b3;
  fit.a2 = b2 - 3.0 * b3 * c;
  fit.a3 = b1 - 2.0 * b2 * c + 3.0 * b3 * c * c;
  fit.a4 = b(0) - b1 * c + b2 * c * c - b3 * c * c * c;
  fit.t_min = distinct.front();
  fit.t_max = distinct.back();
  return fit;
}

/// Temperature of the cubic's local demand minimum inside [t_min, t_max].
inline double reference_temperature(const CubicDemandFit& fit) {
  const double qa = 3.0 * fit.a1;
  const double qb = 2.0 * fit.a2;
  const double qc = fit.a3;
  double root = kMissing;
  if (qa == 0.0) {
    if (qb <= 0.0) throw std::domain_error("demand curve has no local minimum");
    root = -qc / qb;
  } else {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) throw std::domain_error("demand curve has no stationary point");
    const double q = -0.5 * (qb + std::copysign(std::sqrt(disc), qb));
    const double r1 = q / qa;
    const double r2 = q != 0.0 ? qc / q : r1;
    auto curvature = [&](double t) { return 6.0 * fit.a1 * t + 2.0 * fit.a2; };
    if (curvature(r1) > 0.0) {
      root = r1;
    } else if (curvature(r2) > 0.0) {
      root = r2;
    } else {
      throw std::domain_error("demand curve has no local minimum");
    }
  }
  if (!(root >= fit.t_min && root <= fit.t_max)) {
    throw std::domain_error("demand minimum at " + csv::fixed(root, 2) + " degC lies outside the fitted range [" +
                            csv::fixed(fit.t_min, 2) + ", " + csv::fixed(fit.t_max, 2) + "]");
  }
  return root;
}

/// Combined heating and cooling degree days: |T_avg - T0|.
constexpr double degree_days(double t_avg, double t0) { return t_avg >= t0 ? t_avg - t0 : t0 - t_avg; }

inline double global_t0(std::span<const CubicDemandFit> fits) {
  if (fits.empty()) throw std::invalid_argument("global_t0 needs at least one yearly fit");
  double sum = 0.0;
  for (const auto& f : fits) sum += f.t0;
  return sum / static_cast<double>(fits.size());
}

inline DailySeries degree_day_series(std::span<const DailyRegionTemp> temps, double t0) {
  std::vector<std::pair<Date, double>> pairs;
  pairs.reserve(temps.size());
  for (const auto& t : temps) pairs.emplace_back(t.date, degree_days(t.t_avg_c, t0));
  return DailySeries::from_pairs(pairs);
}

/// One cubic per calendar year from days that have both a regional temperature and a
/// complete-enough load day. Years with fewer than 4 distinct temperatures are skipped.
inline std::vector<CubicDemandFit> yearly_cubic_fits(std::span<const DailyRegionTemp> temps,
                                                     std::span<const ingest::DailyLoadSummary> load,
                                                     int min_hours) {
  std::map<long, double> temp_by_day;
  for (const auto& t : temps) temp_by_day[t.date.serial()] = t.t_avg_c;
  std::map<int, std::vector<std::pair<double, double>>> by_year;
  for (const auto& d : load) {
    if (d.hours_present < min_hours) continue;
    const auto it = temp_by_day.find(d.date.serial());
    if (it == temp_by_day.end()) continue;
    by_year[d.date.year()].emplace_back(it->second, d.peak_demand_mw);
  }
  std::vector<CubicDemandFit> fits;
  for (const auto& [year, pairs] : by_year) {
    std::vector<double> xs;
    for (const auto& p : pairs) xs.push_back(p.first);
    if (detail::unique_sorted(xs).size() < 4) continue;
    auto fit = fit_demand_temperature_cubic(pairs);
    fit.year = year;
    try {
      fit.t0 = reference_temperature(fit);
    } catch (const std::domain_error& e) {
      throw std::domain_error("year " + std::to_string(year) + ": " + e.what());
    }
    fits.push_back(fit);
  }
  return fits;
}

/// Calendar-year means over complete years only.
inline std::map<int, double> annual_mean_temperature(std::span<const DailyRegionTemp> temps) {
  std::map<int, std::pair<double, int>> acc;
  for (const auto& t : temps) {
    auto& a = acc[t.date.year()];
    a.first += t.t_avg_c;
    ++a.second;
  }
  std::map<int, double> out;
  for (const auto& [year, a] : acc) {
    if (a.second == days_in_year(year)) out[year] = a.first / a.second;
  }
  return out;
}

struct SpatialSpread {
  std::vector<std::pair<Date, double>> per_day;  // population std across masked-in cells
  double mean = 0.0;                             // average of per_day over the range
  bool single_cell = false;                      // std undefined; reported as 0
};

/// Unweighted across-cell standard deviation of daily mean temperature, averaged over [from, to].
inline SpatialSpread spatial_temp_stddev(const TemperatureGrid& grid, Date from, Date to) {
  if (grid.masked_cells() == 0) throw std::invalid_argument("region mask is empty");
  const auto daily = daily_cell_means(grid);
  SpatialSpread out;
  out.single_cell = grid.masked_cells() == 1;
  auto it = std::lower_bound(daily.dates.begin(), daily.dates.end(), from);
  double total = 0.0;
  for (Date d = from; d <= to; ++d, ++it) {
    if (it == daily.dates.end() || *it != d) throw ParseError(0, "temperature grid has no data for " + d.iso());
    const auto row = static_cast<std::size_t>(it - daily.dates.begin());
    double mean = 0.0;
    int n = 0;
    for (std::size_t c = 0; c < grid.cells(); ++c) {
      if (!grid.mask[c]) continue;
      mean += daily.at(row, c);
      ++n;
    }
    mean /= n;
    double ss = 0.0;
    for (std::size_t c = 0; c < grid.cells(); ++c) {
      if (!grid.mask[c]) continue;
      const double dv = daily.at(row, c) - mean;
      ss += dv * dv;
    }
    const double sd = out.single_cell ? 0.0 : std::sqrt(ss / n);
    out.per_day.emplace_back(d, sd);
    total += sd;
  }
  out.mean = out.per_day.empty() ? 0.0 : total / static_cast<double>(out.per_day.size());
  return out;
}

}  // namespace shoulder::thermal
