#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "shoulder/csv.hpp"
#include "shoulder/trends.hpp"

namespace shoulder {

/// Raised for invalid configuration; `key()` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error("config key '" + key + "': " + what), key_(std::move(key)) {}
  [[nodiscard]] const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct ConfigKeyDoc {
  const char* key;
  const char* default_value;
  const char* help;
};

// clang-format off
inline constexpr ConfigKeyDoc kConfigKeys[] = {
    {"region",                 "region",      "label used in reports"},
    {"load_file",              "",            "hourly load CSV: date,hour,load_mw"},
    {"fuel_mix_file",          "",            "15-minute fuel mix CSV: timestamp,wind_mw,solar_mw,hydro_mw,other_mw"},
    {"grid_file",              "",            "long-format temperature CSV: lat,lon,date,t2m_c"},
    {"grid_raster_file",       "",            "binary raster sidecar (.axes); payload is the same path with .bin"},
    {"mask_file",              "",            "region mask CSV: lat,lon,in_region"},
    {"population_file",        "",            "population CSV: lat,lon,epoch,persons"},
    {"outage_file",            "",            "15-minute outage CSV: timestamp,outage_mw,telemetered_output_mw"},
    {"ensemble_file",          "",            "monthly ensemble CSV: member,year,month,t2m_c"},
    {"output_dir",             "out",         "directory for all outputs (overridden by --out)"},
    {"window_length",          "45",          "shoulder window length in days"},
    {"max_missing_days",       "3",           "missing days tolerated inside a window"},
    {"partial_day_min_hours",  "20",          "load days with fewer hours are treated as missing"},
    {"cross_year_windows",     "true",        "allow fall windows to run into the next January"},
    {"use_net_load",           "false",       "use load net of wind/solar/hydro for electricity windows"},
    {"t0_c",                   "",            "fixed reference temperature; derived from yearly cubic fits when empty"},
    {"outlier_policy",         "studentized", "fall degree-day trend outliers: none | studentized | list:<year>,<year>..."},
    {"outlier_threshold",      "2.5",         "studentized residual threshold"},
    {"outlier_max_removals",   "5",           "cap on studentized removals"},
    {"moving_average_k",       "5",           "centered moving-average width in years (odd)"},
    {"spring_cutoff",          "02-14",       "spring correlations drop degree-day onsets before this MM-DD"},
    {"fall_cutoff",            "11-25",       "fall correlations drop degree-day onsets after this MM-DD"},
    {"bias_overlap_start",     "1959",        "first year of the ensemble bias-correction overlap"},
    {"bias_overlap_end",       "2022",        "last year of the ensemble bias-correction overlap"},
    {"projection_start",       "",            "first projected year; default is the year after the last observed year"},
    {"projection_end",         "",            "last projected year; default is the last ensemble year"},
    {"sigma_multiplier",       "2",           "temperature spread (in ensemble std) carried into onset intervals"},
    {"persistence",            "3",           "consecutive overlapping years required for a merge"},
    {"extra_outage_gw",        "5.5",         "additional planned outages for the unmet-demand table"},
    {"histogram_bin_gw",       "1",           "generation histogram bin width"},
    {"outage_year",            "",            "year for the period outage table; default is the last full outage year"},
    {"unmet_months",           "",            "YYYY-MM list for the unmet-demand table; default: every Jan/Dec with data"},
};
// clang-format on

/// Flat `key = value` run configuration. Blank lines and `#` comments are ignored.
struct RunConfig {
  std::map<std::string, std::string> values;
  std::filesystem::path base_dir = ".";

  static RunConfig defaults() {
    RunConfig c;
    for (const auto& k : kConfigKeys) c.values[k.key] = k.default_value;
    return c;
  }

  static RunConfig parse(std::istream& in, std::filesystem::path base_dir = ".") {
    RunConfig c = defaults();
    c.base_dir = std::move(base_dir);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto t = csv::trim(line);
      if (t.empty() || t.front() == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError(std::string(t), "line " + std::to_string(line_no) + " is not 'key = value'");
      }
      const std::string key(csv::trim(t.substr(0, eq)));
      if (!c.values.contains(key)) throw ConfigError(key, "unknown key");
      c.values[key] = std::string(csv::trim(t.substr(eq + 1)));
    }
    c.validate();
    return c;
  }

  static RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open " + path.string());
    return parse(in, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
  }

  [[nodiscard]] const std::string& raw(const std::string& key) const {
    const auto it = values.find(key);
    if (it == values.end()) throw ConfigError(key, "unknown key");
    return it->second;
  }

  [[nodiscard]] bool has(const std::string& key) const { return !raw(key).empty(); }

  [[nodiscard]] std::optional<std::filesystem::path> path(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    std::filesystem::path p = raw(key);
    return p.is_absolute() ? p : base_dir / p;
  }

  [[nodiscard]] std::filesystem::path required_path(const std::string& key) const {
    auto p = path(key);
    if (!p) throw ConfigError(key, "required by this stage but not set");
    return *p;
  }

  [[nodiscard]] double number(const std::string& key) const {
    try {
      return csv::to_double(raw(key), 0, key);
    } catch (const ParseError&) {
      throw ConfigError(key, "expected a number, got '" + raw(key) + "'");
    }
  }

  [[nodiscard]] int integer(const std::string& key) const {
    try {
      return static_cast<int>(csv::to_long(raw(key), 0, key));
    } catch (const ParseError&) {
      throw ConfigError(key, "expected an integer, got '" + raw(key) + "'");
    }
  }

  [[nodiscard]] std::optional<int> optional_integer(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return integer(key);
  }

  [[nodiscard]] bool flag(const std::string& key) const {
    const auto& v = raw(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key, "expected true or false, got '" + v + "'");
  }

  [[nodiscard]] trends::MonthDay month_day(const std::string& key) const {
    try {
      return trends::MonthDay::parse(raw(key));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key, e.what());
    }
  }

  [[nodiscard]] trends::OutlierPolicy outlier_policy() const {
    trends::OutlierPolicy p;
    const auto& v = raw("outlier_policy");
    p.threshold = number("outlier_threshold");
    p.max_removals = integer("outlier_max_removals");
    if (v == "none") {
      p.kind = trends::OutlierPolicy::Kind::none;
    } else if (v == "studentized") {
      p.kind = trends::OutlierPolicy::Kind::studentized;
    } else if (v.rfind("list:", 0) == 0) {
      p.kind = trends::OutlierPolicy::Kind::explicit_list;
      for (auto year : csv::split(std::string_view(v).substr(5))) {
        if (year.empty()) continue;
        try {
          p.excluded_x.push_back(static_cast<double>(csv::to_long(year, 0, "outlier_policy")));
        } catch (const ParseError&) {
          throw ConfigError("outlier_policy", "bad year '" + std::string(year) + "'");
        }
      }
    } else {
      throw ConfigError("outlier_policy", "expected none, studentized or list:<years>, got '" + v + "'");
    }
    return p;
  }

  /// `YYYY-MM` entries of `unmet_months`.
  [[nodiscard]] std::vector<std::pair<int, unsigned>> unmet_months() const {
    std::vector<std::pair<int, unsigned>> out;
    if (!has("unmet_months")) return out;
    for (auto item : csv::split(raw("unmet_months"))) {
      if (item.size() != 7 || item[4] != '-') throw ConfigError("unmet_months", "expected YYYY-MM, got '" + std::string(item) + "'");
      try {
        const int y = static_cast<int>(csv::to_long(item.substr(0, 4), 0, "unmet_months"));
        const long m = csv::to_long(item.substr(5, 2), 0, "unmet_months");
        if (m < 1 || m > 12) throw ParseError(0, "month");
        out.emplace_back(y, static_cast<unsigned>(m));
      } catch (const ParseError&) {
        throw ConfigError("unmet_months", "expected YYYY-MM, got '" + std::string(item) + "'");
      }
    }
    return out;
  }

  /// Checks every value's type and range and that referenced input files exist.
  void validate() const {
    if (integer("window_length") < 1) throw ConfigError("window_length", "must be >= 1");
    if (integer("max_missing_days") < 0) throw ConfigError("max_missing_days", "must be >= 0");
    const int hours = integer("partial_day_min_hours");
    if (hours < 0 || hours > 24) throw ConfigError("partial_day_min_hours", "must be in 0..24");
    (void)flag("cross_year_windows");
    (void)flag("use_net_load");
    if (has("t0_c")) (void)number("t0_c");
    (void)outlier_policy();
    const int k = integer("moving_average_k");
    if (k < 1 || k % 2 == 0) throw ConfigError("moving_average_k", "must be odd and >= 1");
    (void)month_day("spring_cutoff");
    (void)month_day("fall_cutoff");
    if (integer("bias_overlap_end") < integer("bias_overlap_start")) {
      throw ConfigError("bias_overlap_end", "must not precede bias_overlap_start");
    }
    (void)optional_integer("projection_start");
    (void)optional_integer("projection_end");
    if (number("sigma_multiplier") < 0) throw ConfigError("sigma_multiplier", "must be >= 0");
    if (integer("persistence") < 1) throw ConfigError("persistence", "must be >= 1");
    if (number("extra_outage_gw") < 0) throw ConfigError("extra_outage_gw", "must be >= 0");
    if (!(number("histogram_bin_gw") > 0)) throw ConfigError("histogram_bin_gw", "must be > 0");
    (void)optional_integer("outage_year");
    (void)unmet_months();
    for (const char* key : {"load_file", "fuel_mix_file", "grid_file", "grid_raster_file", "mask_file",
                            "population_file", "outage_file", "ensemble_file"}) {
      if (const auto p = path(key); p && !std::filesystem::exists(*p)) {
        throw ConfigError(key, "file does not exist: " + p->string());
      }
    }
    if (has("grid_file") && has("grid_raster_file")) {
      throw ConfigError("grid_raster_file", "set either grid_file or grid_raster_file, not both");
    }
  }

  [[nodiscard]] static std::string help_text() {
    std::ostringstream out;
    out << "Configuration keys (key = value, one per line; relative paths resolve against the config file):\n";
    for (const auto& k : kConfigKeys) {
      out << "  " << k.key << " [default: " << (*k.default_value ? k.default_value : "unset") << "]\n      " << k.help
          << '\n';
    }
    return out.str();
  }
};

}  // namespace shoulder
