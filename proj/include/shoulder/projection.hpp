#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "shoulder/csv.hpp"
#include "shoulder/date.hpp"
#include "shoulder/trends.hpp"
#include "shoulder/windows.hpp"

namespace shoulder::projection {

struct EnsembleRecord {
  std::string member;
  int year = 0;
  unsigned month = 1;
  double t2m_c = 0.0;
};

/// Reads `member,year,month,t2m_c` monthly regional means.
inline std::vector<EnsembleRecord> parse_ensemble(std::istream& in) {
  csv::Reader r(in, {"member", "year", "month", "t2m_c"});
  std::vector<EnsembleRecord> out;
  while (r.next()) {
    EnsembleRecord rec;
    rec.member = std::string(r.field(0));
    if (rec.member.empty()) throw ParseError(r.line(), "empty member id");
    rec.year = static_cast<int>(r.integer(1));
    const long m = r.integer(2);
    if (m < 1 || m > 12) throw ParseError(r.line(), "month must be in 1..12");
    rec.month = static_cast<unsigned>(m);
    rec.t2m_c = r.number(3);
    if (!std::isfinite(rec.t2m_c)) throw ParseError(r.line(), "t2m_c is not finite");
    out.push_back(std::move(rec));
  }
  return out;
}

struct EnsembleAnnualStats {
  int year = 0;
  double mean_c = 0.0;
  double std_c = 0.0;  // population standard deviation across members
  int n_members = 0;
};

/// Per member, the day-weighted mean of the 12 monthly values; per year, the mean and
/// standard deviation of those member means. Incomplete member-years are rejected.
inline std::vector<EnsembleAnnualStats> ensemble_annual_stats(std::span<const EnsembleRecord> records) {
  std::map<int, std::map<std::string, std::array<double, 12>>> table;
  std::map<int, std::map<std::string, std::array<bool, 12>>> seen;
  for (const auto& r : records) {
    auto& flags = seen[r.year][r.member];
    if (flags[r.month - 1]) {
      throw std::invalid_argument("duplicate month " + std::to_string(r.month) + " for member " + r.member +
                                  " year " + std::to_string(r.year));
    }
    flags[r.month - 1] = true;
    table[r.year][r.member][r.month - 1] = r.t2m_c;
  }
  std::vector<EnsembleAnnualStats> out;
  for (const auto& [year, members] : table) {
    std::vector<double> annual;
    for (const auto& [member, months] : members) {
      const auto& flags = seen[year][member];
      if (!std::all_of(flags.begin(), flags.end(), [](bool b) { return b; })) {
        throw std::invalid_argument("incomplete member-year: member " + member + " year " + std::to_string(year));
      }
      double sum = 0.0;
      for (unsigned m = 1; m <= 12; ++m) sum += months[m - 1] * days_in_month(year, m);
      annual.push_back(sum / days_in_year(year));
    }
    const double n = static_cast<double>(annual.size());
    double mean = 0.0;
    for (double a : annual) mean += a;
    mean /= n;
    double ss = 0.0;
    for (double a : annual) ss += (a - mean) * (a - mean);
    out.push_back({year, mean, std::sqrt(ss / n), static_cast<int>(annual.size())});
  }
  return out;
}

/// Affine map of ensemble temperatures onto observations: corrected = gain * raw + offset.
struct BiasCorrection {
  double gain = 1.0;
  double offset = 0.0;

  [[nodiscard]] double apply(double raw) const { return gain * raw + offset; }
};

/// Least-squares fit of observed annual means on ensemble annual means over [from, to].
inline BiasCorrection fit_bias_correction(const std::map<int, double>& observed,
                                          std::span<const EnsembleAnnualStats> ensemble, int from, int to) {
  std::vector<trends::Point> pts;
  for (const auto& e : ensemble) {
    if (e.year < from || e.year > to) continue;
    const auto it = observed.find(e.year);
    if (it != observed.end()) pts.emplace_back(e.mean_c, it->second);
  }
  if (pts.size() < 3) throw std::invalid_argument("bias correction needs at least 3 overlap years");
  trends::LinearFit fit;
  try {
    fit = trends::fit_line(pts);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("bias correction is degenerate: ensemble means have no variance");
  }
  return {fit.slope, fit.intercept};
}

struct CorrectedTemperature {
  int year = 0;
  double mean_c = 0.0;
  double std_c = 0.0;
};

inline std::vector<CorrectedTemperature> corrected_path(std::span<const EnsembleAnnualStats> stats,
                                                        const BiasCorrection& bc) {
  std::vector<CorrectedTemperature> out;
  for (const auto& s : stats) out.push_back({s.year, bc.apply(s.mean_c), std::abs(bc.gain) * s.std_c});
  return out;
}

/// OLS of onset day-of-year on annual mean temperature for the years present in both maps.
inline trends::TrendResult onset_vs_temperature(const std::map<int, double>& annual_temp,
                                                const std::map<int, double>& onset_doy, windows::Season season) {
  std::vector<trends::Point> pts;
  for (const auto& [year, doy] : onset_doy) {
    const auto it = annual_temp.find(year);
    if (it != annual_temp.end()) pts.emplace_back(it->second, doy);
  }
  return trends::linear_trend(pts, trends::direction_for(season));
}

struct OnsetProjection {
  int year = 0;
  double predicted_onset = 0.0;  // day of year
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Onset predicted by `line` at each year's corrected temperature. The 95% half-width combines
/// the regression mean-response interval with the +-sigma_multiplier temperature spread
/// carried through the slope, added in quadrature.
inline std::vector<OnsetProjection> project_onsets(const trends::LinearFit& line,
                                                   std::span<const CorrectedTemperature> path, int from, int to,
                                                   double sigma_multiplier = 2.0) {
  std::map<int, CorrectedTemperature> by_year;
  for (const auto& p : path) by_year[p.year] = p;
  const double t = trends::t_critical(line.dof());
  std::vector<OnsetProjection> out;
  for (int year = from; year <= to; ++year) {
    const auto it = by_year.find(year);
    if (it == by_year.end()) {
      throw std::invalid_argument("temperature path does not cover projection year " + std::to_string(year));
    }
    const double temp = it->second.mean_c;
    const double regression = t * line.mean_stderr(temp);
    const double spread = line.slope * sigma_multiplier * it->second.std_c;
    const double half = std::sqrt(regression * regression + spread * spread);
    const double pred = line(temp);
    out.push_back({year, pred, pred - half, pred + half});
  }
  return out;
}

/// Whether fall year `y` and spring year `y + 1` intervals intersect on a continuous day axis.
inline bool windows_overlap(const OnsetProjection& fall, const OnsetProjection& next_spring) {
  const double shift = days_in_year(fall.year);
  return fall.ci_low <= next_spring.ci_high + shift && next_spring.ci_low + shift <= fall.ci_high;
}

/// First fall year from which the fall interval overlaps the following spring's interval for
/// `persistence` consecutive years.
inline std::optional<int> merge_year(std::span<const OnsetProjection> spring, std::span<const OnsetProjection> fall,
                                     int persistence = 3) {
  if (persistence < 1) throw std::invalid_argument("persistence must be >= 1");
  std::map<int, OnsetProjection> spring_by_year;
  for (const auto& s : spring) spring_by_year[s.year] = s;
  std::map<int, bool> overlap;
  for (const auto& f : fall) {
    const auto it = spring_by_year.find(f.year + 1);
    if (it != spring_by_year.end()) overlap[f.year] = windows_overlap(f, it->second);
  }
  for (const auto& [year, ok] : overlap) {
    if (!ok) continue;
    bool persists = true;
    for (int k = 1; k < persistence && persists; ++k) {
      const auto it = overlap.find(year + k);
      persists = it != overlap.end() && it->second;
    }
    if (persists) return year;
  }
  return std::nullopt;
}

}  // namespace shoulder::projection
