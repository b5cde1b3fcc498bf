#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "shoulder/date.hpp"
#include "shoulder/windows.hpp"

namespace shoulder::trends {

using Point = std::pair<double, double>;  // (x, y), e.g. (year, onset day-of-year)

/// Ordinary least-squares line with the pieces needed for standard errors and bands.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double residual_sd = 0.0;  // s, with n - 2 degrees of freedom
  std::size_t n = 0;
  double x_mean = 0.0;
  double sxx = 0.0;

  [[nodiscard]] double operator()(double x) const { return intercept + slope * x; }
  [[nodiscard]] int dof() const { return static_cast<int>(n) - 2; }

  /// Standard error of the fitted mean response at x.
  [[nodiscard]] double mean_stderr(double x) const {
    return residual_sd * std::sqrt(1.0 / static_cast<double>(n) + (x - x_mean) * (x - x_mean) / sxx);
  }
};

inline LinearFit fit_line(std::span<const Point> points) {
  if (points.size() < 3) throw std::invalid_argument("linear fit needs at least 3 points");
  const double n = static_cast<double>(points.size());
  double mx = 0.0;
  double my = 0.0;
  for (const auto& [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("linear fit is degenerate: all abscissae are equal");
  LinearFit fit;
  fit.n = points.size();
  fit.x_mean = mx;
  fit.sxx = sxx;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (const auto& [x, y] : points) {
    const double e = y - fit(x);
    ss += e * e;
  }
  fit.residual_sd = std::sqrt(ss / (n - 2.0));
  fit.slope_stderr = fit.residual_sd / std::sqrt(sxx);
  return fit;
}

/// Two-sided Student-t critical value, e.g. level 0.95 -> t_{0.975, dof}.
inline double t_critical(int dof, double level = 0.95) {
  if (dof < 1) throw std::invalid_argument("t quantile needs dof >= 1");
  const boost::math::students_t dist(static_cast<double>(dof));
  return boost::math::quantile(dist, 0.5 + 0.5 * level);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

enum class Direction { earlier, later };

inline Direction direction_for(windows::Season s) {
  return s == windows::Season::spring ? Direction::earlier : Direction::later;
}

/// Probability, under a normal approximation to the slope estimate, that the true
/// rate of change points in `direction`. A zero standard error saturates by sign.
inline double shift_probability(double slope, double stderr_, Direction direction) {
  if (stderr_ < 0.0 || std::isnan(stderr_)) throw std::invalid_argument("slope standard error must be >= 0");
  const double signed_slope = direction == Direction::earlier ? -slope : slope;
  if (stderr_ == 0.0) {
    return signed_slope > 0.0 ? 1.0 : (signed_slope < 0.0 ? 0.0 : 0.5);
  }
  return normal_cdf(signed_slope / stderr_);
}

struct TrendResult {
  LinearFit fit;
  Direction direction = Direction::earlier;
  double shift_probability = 0.5;
  std::vector<Point> excluded_points;

  [[nodiscard]] double slope_per_decade() const { return 10.0 * fit.slope; }
  [[nodiscard]] double stderr_per_decade() const { return 10.0 * fit.slope_stderr; }
};

/// OLS trend, dropping any point whose x appears in `excluded_x`.
inline TrendResult linear_trend(std::span<const Point> points, Direction direction,
                                std::span<const double> excluded_x = {}) {
  std::vector<Point> kept;
  TrendResult result;
  result.direction = direction;
  for (const auto& p : points) {
    if (std::find(excluded_x.begin(), excluded_x.end(), p.first) != excluded_x.end()) {
      result.excluded_points.push_back(p);
    } else {
      kept.push_back(p);
    }
  }
  result.fit = fit_line(kept);
  result.shift_probability = shift_probability(result.fit.slope, result.fit.slope_stderr, direction);
  return result;
}

struct OutlierPolicy {
  enum class Kind { none, studentized, explicit_list } kind = Kind::none;
  double threshold = 2.5;
  int max_removals = 5;
  std::vector<double> excluded_x;
};

/// Applies the outlier policy. The studentized variant repeatedly drops the point with the
/// largest internally studentized residual while it exceeds the threshold, up to the cap.
inline TrendResult robust_trend(std::span<const Point> points, Direction direction, const OutlierPolicy& policy) {
  switch (policy.kind) {
    case OutlierPolicy::Kind::none: return linear_trend(points, direction);
    case OutlierPolicy::Kind::explicit_list: return linear_trend(points, direction, policy.excluded_x);
    case OutlierPolicy::Kind::studentized: break;
  }
  std::vector<Point> kept(points.begin(), points.end());
  std::vector<double> dropped;
  for (int round = 0; round < policy.max_removals && kept.size() > 3; ++round) {
    const auto fit = fit_line(kept);
    if (fit.residual_sd == 0.0) break;
    double worst = 0.0;
    std::size_t worst_i = kept.size();
    for (std::size_t i = 0; i < kept.size(); ++i) {
      const auto& [x, y] = kept[i];
      const double leverage = 1.0 / static_cast<double>(fit.n) + (x - fit.x_mean) * (x - fit.x_mean) / fit.sxx;
      const double r = std::abs(y - fit(x)) / (fit.residual_sd * std::sqrt(std::max(1e-12, 1.0 - leverage)));
      if (r > worst) {
        worst = r;
        worst_i = i;
      }
    }
    if (worst <= policy.threshold) break;
    dropped.push_back(kept[worst_i].first);
    kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(worst_i));
  }
  return linear_trend(points, direction, dropped);
}

struct BandPoint {
  double x = 0.0;
  double fitted = 0.0;
  double low = 0.0;
  double high = 0.0;
};

/// Pointwise confidence band for the mean response.
inline std::vector<BandPoint> confidence_band(const LinearFit& fit, std::span<const double> xs, double level = 0.95) {
  const double t = t_critical(fit.dof(), level);
  std::vector<BandPoint> out;
  for (double x : xs) {
    const double half = t * fit.mean_stderr(x);
    out.push_back({x, fit(x), fit(x) - half, fit(x) + half});
  }
  return out;
}

/// Centered moving average over neighbors within k/2 of each x; truncated at edges and gaps.
inline std::vector<Point> moving_average(std::span<const Point> points, int k = 5) {
  if (k < 1 || k % 2 == 0) throw std::invalid_argument("moving average width must be odd and >= 1");
  const double half = k / 2;
  std::vector<Point> out;
  out.reserve(points.size());
  for (const auto& [x, y] : points) {
    double sum = 0.0;
    int n = 0;
    for (const auto& [x2, y2] : points) {
      if (std::abs(x2 - x) <= half) {
        sum += y2;
        ++n;
      }
    }
    out.emplace_back(x, sum / n);
  }
  return out;
}

inline double pearson(std::span<const Point> pairs) {
  if (pairs.size() < 2) throw std::invalid_argument("correlation needs at least 2 pairs");
  const double n = static_cast<double>(pairs.size());
  double mx = 0.0;
  double my = 0.0;
  for (const auto& [x, y] : pairs) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (const auto& [x, y] : pairs) {
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
    sxy += (x - mx) * (y - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw std::invalid_argument("correlation undefined for a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct MonthDay {
  unsigned month = 1;
  unsigned day = 1;

  /// Parses `MM-DD`.
  static MonthDay parse(std::string_view s) {
    if (s.size() != 5 || s[2] != '-') throw std::invalid_argument("expected MM-DD, got '" + std::string(s) + "'");
    const auto m = static_cast<unsigned>((s[0] - '0') * 10 + (s[1] - '0'));
    const auto d = static_cast<unsigned>((s[3] - '0') * 10 + (s[4] - '0'));
    if (m < 1 || m > 12 || d < 1 || d > 31) throw std::invalid_argument("invalid month-day '" + std::string(s) + "'");
    return {m, d};
  }
  [[nodiscard]] Date in(int year) const { return Date(year, month, std::min<unsigned>(day, static_cast<unsigned>(days_in_month(year, month)))); }
};

inline constexpr MonthDay kSpringCutoff{2, 14};
inline constexpr MonthDay kFallCutoff{11, 25};

struct CorrelationResult {
  double r = 0.0;
  std::size_t n_used = 0;
  MonthDay cutoff;
  std::size_t excluded_count = 0;
  std::vector<int> excluded_years;
};

/// Pearson correlation of onset day-of-year between two per-year onset maps. In spring, years
/// where `x` starts before the cutoff are excluded; in fall, years where it starts after.
inline CorrelationResult pearson_with_cutoff(const std::map<int, Date>& x, const std::map<int, Date>& y,
                                             windows::Season season, MonthDay cutoff) {
  CorrelationResult result;
  result.cutoff = cutoff;
  std::vector<Point> pairs;
  for (const auto& [year, xd] : x) {
    const auto it = y.find(year);
    if (it == y.end()) continue;
    const Date limit = cutoff.in(year);
    const bool drop = season == windows::Season::spring ? xd < limit : xd > limit;
    if (drop) {
      result.excluded_years.push_back(year);
      continue;
    }
    pairs.emplace_back(xd.day_of_year(), it->second.day_of_year());
  }
  result.excluded_count = result.excluded_years.size();
  if (pairs.size() < 3) {
    throw std::invalid_argument("fewer than 3 paired years remain after the cutoff");
  }
  result.n_used = pairs.size();
  result.r = pearson(pairs);
  return result;
}

}  // namespace shoulder::trends
