#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace shoulder {

/// Raised for malformed or invalid input data. `line()` is 1-based; 0 when not tied to a row.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

inline double to_double(std::string_view field, std::size_t line, std::string_view column) {
  double v = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc{} || ptr != last) {
    throw ParseError(line, "column '" + std::string(column) + "': not a number '" +
                               std::string(field) + "'");
  }
  return v;
}

inline long to_long(std::string_view field, std::size_t line, std::string_view column) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError(line, "column '" + std::string(column) + "': not an integer '" +
                               std::string(field) + "'");
  }
  return v;
}

/// Reads a comma-separated stream with a mandatory header row.
/// Blank lines and lines starting with '#' are skipped.
class Reader {
 public:
  Reader(std::istream& in, std::vector<std::string> expected_header)
      : in_(in), columns_(std::move(expected_header)) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      const auto t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      if (t.size() >= 3 && static_cast<unsigned char>(t[0]) == 0xEF) {
        line = std::string(t.substr(3));  // UTF-8 BOM
      }
      const auto fields = split(trim(line));
      if (fields.size() != columns_.size()) {
        throw ParseError(line_no_, "header mismatch, expected '" + joined_header() + "'");
      }
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i] != columns_[i]) {
          throw ParseError(line_no_, "header mismatch, expected '" + joined_header() + "'");
        }
      }
      return;
    }
    throw ParseError(0, "empty input, expected header '" + joined_header() + "'");
  }

  /// Advances to the next data row. Returns false at end of stream.
  bool next() {
    while (std::getline(in_, buffer_)) {
      ++line_no_;
      const auto t = trim(buffer_);
      if (t.empty() || t.front() == '#') continue;
      fields_ = split(t);
      if (fields_.size() != columns_.size()) {
        throw ParseError(line_no_, "expected " + std::to_string(columns_.size()) + " fields, got " +
                                       std::to_string(fields_.size()));
      }
      return true;
    }
    return false;
  }

  [[nodiscard]] std::string_view field(std::size_t i) const { return fields_.at(i); }
  [[nodiscard]] double number(std::size_t i) const { return to_double(fields_.at(i), line_no_, columns_[i]); }
  [[nodiscard]] long integer(std::size_t i) const { return to_long(fields_.at(i), line_no_, columns_[i]); }
  [[nodiscard]] std::size_t line() const { return line_no_; }
  [[nodiscard]] const std::string& column(std::size_t i) const { return columns_.at(i); }

 private:
  std::string joined_header() const {
    std::string h;
    for (const auto& c : columns_) h += (h.empty() ? "" : ",") + c;
    return h;
  }

  std::istream& in_;
  std::vector<std::string> columns_;
  std::string buffer_;
  std::vector<std::string_view> fields_;
  std::size_t line_no_ = 0;
};

/// Shortest text that parses back to exactly `v`.
inline std::string exact(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/// Fixed-point formatting for report tables.
inline std::string fixed(double v, int decimals) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s == "-0" || s.rfind("-0.", 0) == 0) {
    bool all_zero = true;
    for (char c : s.substr(1)) all_zero = all_zero && (c == '0' || c == '.');
    if (all_zero) s.erase(0, 1);
  }
  return s;
}

/// Significant-figure formatting (`%.*g`), used for GW tables.
inline std::string sig(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

}  // namespace csv
}  // namespace shoulder
