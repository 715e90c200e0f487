#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gefz {

/// Library version string (set at build time).
const char* version();

/// Malformed or schema-violating configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads keys of one JSON object, records the effective values (including
/// defaults) and rejects keys that were never requested.
class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& object, std::string where);

  template <class T>
  T get(const std::string& key, const T& fallback) {
    requested_.insert(key);
    T v = fallback;
    if (object_.contains(key)) {
      try {
        v = object_.at(key).get<T>();
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(where_ + "." + key + ": " + e.what());
      }
    }
    effective_[key] = v;
    return v;
  }

  template <class T>
  T require(const std::string& key) {
    if (!object_.contains(key)) throw ConfigError(where_ + ": missing key " + key);
    return get<T>(key, T{});
  }

  /// Sub-object (empty when absent); its reader must be finished separately.
  ConfigReader child(const std::string& key);
  /// Stores a finished child's effective values under `key`.
  void adopt(const std::string& key, const ConfigReader& child);

  /// Throws ConfigError on unknown keys.
  void finish() const;
  const nlohmann::ordered_json& effective() const { return effective_; }

 private:
  nlohmann::json object_;
  std::string where_;
  std::set<std::string> requested_;
  nlohmann::ordered_json effective_;
};

/// Parses a JSON file; ConfigError on I/O or syntax errors.
nlohmann::json load_json_file(const std::filesystem::path& path);

/// 64-bit FNV-1a of the canonical (sorted-key, compact) JSON dump.
std::string config_hash(const nlohmann::json& config);

struct Provenance {
  std::string command;
  std::uint64_t master_seed = 0;
  std::string config_hash;
  nlohmann::ordered_json effective_config;
};

/// '#'-comment lines placed before the CSV header row.
std::string provenance_csv_header(const Provenance& p);
/// Provenance object placed as the first key of every JSON output.
nlohmann::ordered_json provenance_json(const Provenance& p);

/// Writes to `path.tmp` and renames over `path`.
void atomic_write(const std::filesystem::path& path, const std::string& content);

/// CSV writing helpers (RFC 4180, CRLF, '.' decimal).
std::string csv_field(const std::string& s);
std::string csv_number(double v);
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  void add_row(std::vector<std::string> row);
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Writes provenance + CSV body.
void write_csv(const std::filesystem::path& path, const Provenance& p, const CsvTable& t);
/// Writes {"provenance": ..., <body keys>} with 2-space indentation.
void write_json(const std::filesystem::path& path, const Provenance& p,
                const nlohmann::ordered_json& body);

/// Static SVG line/point plot.
struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
  std::string color = "#1f77b4";
  bool markers = false;
  bool line = true;
  std::vector<double> error_bars;  ///< optional symmetric y errors
};
std::string svg_plot(const std::string& title, const std::string& x_label,
                     const std::string& y_label, const std::vector<SvgSeries>& series,
                     bool log_x = false, bool log_y = false);
/// Histogram of standardized samples with the N(0,1) density overlaid.
std::string svg_histogram_vs_normal(const std::string& title, const std::vector<double>& z,
                                    int bins = 40);
void write_svg(const std::filesystem::path& path, const Provenance& p, const std::string& svg);

}  // namespace gefz
