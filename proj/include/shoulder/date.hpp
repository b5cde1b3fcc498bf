#pragma once

#include <chrono>
#include <compare>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace shoulder {

/// Civil calendar date stored as a day count since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;

  constexpr Date(int year, unsigned month, unsigned day) {
    const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                          std::chrono::day{day}};
    if (!ymd.ok()) {
      throw std::invalid_argument("invalid calendar date");
    }
    serial_ = std::chrono::sys_days{ymd}.time_since_epoch().count();
  }

  static constexpr Date from_serial(long serial) {
    Date d;
    d.serial_ = serial;
    return d;
  }

  /// Parses `YYYY-MM-DD`. Throws std::invalid_argument on anything else.
  static Date parse(std::string_view text) {
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
      throw std::invalid_argument("expected YYYY-MM-DD, got '" + std::string(text) + "'");
    }
    for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
      if (text[i] < '0' || text[i] > '9') {
        throw std::invalid_argument("expected YYYY-MM-DD, got '" + std::string(text) + "'");
      }
    }
    auto digits = [&](std::size_t pos, std::size_t n) {
      int v = 0;
      for (std::size_t i = 0; i < n; ++i) v = v * 10 + (text[pos + i] - '0');
      return v;
    };
    y = digits(0, 4);
    m = static_cast<unsigned>(digits(5, 2));
    d = static_cast<unsigned>(digits(8, 2));
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) {
      throw std::invalid_argument("invalid calendar date '" + std::string(text) + "'");
    }
    return Date(y, m, d);
  }

  [[nodiscard]] constexpr long serial() const { return serial_; }

  [[nodiscard]] constexpr std::chrono::year_month_day ymd() const {
    return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{serial_}}};
  }
  [[nodiscard]] constexpr int year() const { return static_cast<int>(ymd().year()); }
  [[nodiscard]] constexpr unsigned month() const { return static_cast<unsigned>(ymd().month()); }
  [[nodiscard]] constexpr unsigned day() const { return static_cast<unsigned>(ymd().day()); }

  /// Ordinal day of year, Jan 1 = 1 (Feb 29 counted in leap years).
  [[nodiscard]] constexpr int day_of_year() const {
    return static_cast<int>(serial_ - Date(year(), 1, 1).serial_) + 1;
  }

  [[nodiscard]] std::string iso() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year(), month(), day());
    return buf;
  }

  constexpr Date operator+(long days) const { return from_serial(serial_ + days); }
  constexpr Date operator-(long days) const { return from_serial(serial_ - days); }
  constexpr long operator-(Date other) const { return serial_ - other.serial_; }
  constexpr Date& operator++() {
    ++serial_;
    return *this;
  }

  constexpr auto operator<=>(const Date&) const = default;

 private:
  long serial_ = 0;
};

constexpr bool is_leap_year(int year) { return std::chrono::year{year}.is_leap(); }
constexpr int days_in_year(int year) { return is_leap_year(year) ? 366 : 365; }

constexpr int days_in_month(int year, unsigned month) {
  const std::chrono::year_month_day_last last{std::chrono::year{year} / std::chrono::month{month} /
                                              std::chrono::last};
  return static_cast<int>(static_cast<unsigned>(last.day()));
}

/// Date for an ordinal day of year; day 366 of a common year rolls into the next year.
constexpr Date date_from_day_of_year(int year, int doy) { return Date(year, 1, 1) + (doy - 1); }

/// A calendar date plus a whole hour, or a quarter-hour resolution timestamp.
struct Timestamp {
  Date date;
  int minute_of_day = 0;  // 0..1439

  [[nodiscard]] long long minutes() const {
    return static_cast<long long>(date.serial()) * 1440 + minute_of_day;
  }
  [[nodiscard]] int hour() const { return minute_of_day / 60; }

  /// Parses `YYYY-MM-DDTHH:MM[:SS]` or `YYYY-MM-DD HH:MM[:SS]`. Seconds must be zero.
  static Timestamp parse(std::string_view text) {
    if (text.size() != 16 && text.size() != 19) {
      throw std::invalid_argument("expected ISO-8601 timestamp, got '" + std::string(text) + "'");
    }
    if ((text[10] != 'T' && text[10] != ' ') || text[13] != ':') {
      throw std::invalid_argument("expected ISO-8601 timestamp, got '" + std::string(text) + "'");
    }
    auto two = [&](std::size_t pos) {
      if (text[pos] < '0' || text[pos] > '9' || text[pos + 1] < '0' || text[pos + 1] > '9') {
        throw std::invalid_argument("bad digits in timestamp '" + std::string(text) + "'");
      }
      return (text[pos] - '0') * 10 + (text[pos + 1] - '0');
    };
    Timestamp ts;
    ts.date = Date::parse(text.substr(0, 10));
    const int hh = two(11);
    const int mm = two(14);
    if (text.size() == 19) {
      if (text[16] != ':' || two(17) != 0) {
        throw std::invalid_argument("timestamp seconds must be :00 in '" + std::string(text) + "'");
      }
    }
    if (hh > 23 || mm > 59) {
      throw std::invalid_argument("time of day out of range in '" + std::string(text) + "'");
    }
    ts.minute_of_day = hh * 60 + mm;
    return ts;
  }

  [[nodiscard]] std::string iso() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d:%02d", minute_of_day / 60, minute_of_day % 60);
    return date.iso() + "T" + buf;
  }

  auto operator<=>(const Timestamp&) const = default;
};

}  // namespace shoulder
