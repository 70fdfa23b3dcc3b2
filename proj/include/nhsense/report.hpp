#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nhsense/scenario.hpp"

namespace nhsense {

inline constexpr const char* kVersion = "0.1.0";

/// Writes through a sibling temporary file and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// 64-bit FNV-1a of `text`, as 16 lowercase hex digits.
std::string input_hash(const std::string& text);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false;  // scatter instead of a polyline
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<Series> series;
};

/// Standalone SVG document. Non-finite points and non-positive values on log axes are skipped.
std::string render_svg(const Plot& plot);

/// CSV text: a `# meta: ` line carrying `meta_json`, the header row, then one line per row.
std::string render_csv(const std::string& meta_json, const std::vector<std::string>& columns,
                       const std::vector<std::vector<std::string>>& rows);

/// Shortest text that reads back to the same double.
std::string format_number(double x);

struct RunOptions {
  std::optional<std::string> out_dir;
  std::optional<std::vector<std::string>> formats;
  unsigned threads = 1;
  std::optional<std::uint64_t> seed;
};

struct RunSummary {
  std::filesystem::path directory;
  std::vector<std::string> files;
  std::string report_json;  // the JSON report, also written when json output is selected
};

/// Runs the scenario's experiment and writes its artifacts. CSV and SVG files depend only on
/// the scenario and seed; the JSON report adds wall time.
RunSummary run_scenario(Scenario scenario, const RunOptions& options);

}  // namespace nhsense
