#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "riccilab/geometry.hpp"

namespace riccilab {

/// Shortest-roundtrip-safe text form (17 significant digits).
std::string format_double(double v);

/// The JSON sidecar belonging to a metric CSV: same stem, ".json".
std::filesystem::path sidecar_path(const std::filesystem::path& csv);

void write_metric(const std::filesystem::path& csv, const WarpedMetric& g, double time);

struct LoadedMetric {
  WarpedMetric metric;
  double time = 0.0;
};

/// Reads the CSV and its sidecar; throws FormatError naming the bad key.
LoadedMetric read_metric(const std::filesystem::path& csv, double pole_tolerance = kPoleTolerance);

/// Plain CSV with a header row and equally long numeric columns.
void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& columns);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;
  const std::vector<double>& column(const std::string& name) const;
};

Table read_table(const std::filesystem::path& path);

/// Writes text, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace riccilab
