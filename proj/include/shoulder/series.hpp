#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "shoulder/date.hpp"

namespace shoulder {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// Dense day-indexed series. Missing days hold NaN.
struct DailySeries {
  Date first;
  std::vector<double> values;

  [[nodiscard]] bool empty() const { return values.empty(); }
  [[nodiscard]] Date last() const { return first + static_cast<long>(values.size()) - 1; }

  [[nodiscard]] bool covers(Date d) const {
    return !values.empty() && d >= first && d <= last();
  }

  /// NaN for missing days and for dates outside the series.
  [[nodiscard]] double at(Date d) const { return covers(d) ? values[static_cast<std::size_t>(d - first)] : kMissing; }

  [[nodiscard]] bool present(Date d) const { return !std::isnan(at(d)); }

  /// Builds a series from (date, value) pairs in any order; later duplicates overwrite earlier ones.
  static DailySeries from_pairs(const std::vector<std::pair<Date, double>>& pairs) {
    DailySeries s;
    if (pairs.empty()) return s;
    Date lo = pairs.front().first;
    Date hi = lo;
    for (const auto& [d, v] : pairs) {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    s.first = lo;
    s.values.assign(static_cast<std::size_t>(hi - lo) + 1, kMissing);
    for (const auto& [d, v] : pairs) s.values[static_cast<std::size_t>(d - lo)] = v;
    return s;
  }

  [[nodiscard]] std::vector<std::pair<Date, double>> present_pairs() const {
    std::vector<std::pair<Date, double>> out;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isnan(values[i])) out.emplace_back(first + static_cast<long>(i), values[i]);
    }
    return out;
  }

  /// True if any present value falls in calendar year `year` between the given months (inclusive).
  [[nodiscard]] bool has_data_in(int year, unsigned month_from, unsigned month_to) const {
    if (values.empty()) return false;
    const Date from(year, month_from, 1);
    const Date to = Date(year, month_to, 1) + (days_in_month(year, month_to) - 1);
    for (Date d = std::max(from, first); d <= std::min(to, last()); ++d) {
      if (present(d)) return true;
    }
    return false;
  }
};

}  // namespace shoulder
