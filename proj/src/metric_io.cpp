#include "riccilab/metric_io.hpp"

#include <charconv>
#include <limits>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "riccilab/errors.hpp"

namespace riccilab {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

fs::path sidecar_path(const fs::path& csv) {
  fs::path p = csv;
  p.replace_extension(".json");
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open file", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_table(const fs::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& columns) {
  if (header.size() != columns.size()) throw ParameterError("header and column count differ");
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns) {
    if (c.size() != rows) throw ParameterError("ragged table columns");
  }
  std::string text;
  for (std::size_t j = 0; j < header.size(); ++j) text += (j ? "," : "") + header[j];
  text += '\n';
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (j) text += ',';
      text += format_double(columns[j][i]);
    }
    text += '\n';
  }
  write_text(path, text);
}

namespace {

double parse_double(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw FormatError("not a number: '" + std::string(s) + "'", where);
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace

const std::vector<double>& Table::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return columns[j];
  }
  throw FormatError("missing column", name);
}

Table read_table(const fs::path& path) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  std::string line;
  Table t;
  if (!std::getline(in, line)) throw FormatError("empty table", path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  for (auto h : split(line)) t.header.emplace_back(h);
  t.columns.resize(t.header.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw FormatError("wrong number of cells", path.string() + ":" + std::to_string(row + 1));
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      t.columns[j].push_back(parse_double(cells[j], path.string() + ":" + t.header[j]));
    }
  }
  return t;
}

void write_metric(const fs::path& csv, const WarpedMetric& g, double time) {
  write_table(csv, {"x", "phi", "psi"}, {g.x, g.phi, g.psi});
  json side = {{"n", g.n}, {"topology", to_string(g.topology)}, {"time", time}};
  write_text(sidecar_path(csv), side.dump(2) + "\n");
}

LoadedMetric read_metric(const fs::path& csv, double pole_tolerance) {
  const Table t = read_table(csv);
  if (t.header != std::vector<std::string>{"x", "phi", "psi"}) {
    throw FormatError("metric CSV header must be x,phi,psi", csv.string());
  }
  const auto side_path = sidecar_path(csv);
  json side;
  try {
    side = json::parse(read_text(side_path));
  } catch (const json::exception& e) {
    throw FormatError(std::string("sidecar is not valid JSON: ") + e.what(), side_path.string());
  }
  LoadedMetric out;
  try {
    out.metric.n = side.at("n").get<int>();
  } catch (const json::exception&) {
    throw FormatError("sidecar missing integer", "n");
  }
  try {
    out.metric.topology = topology_from_string(side.at("topology").get<std::string>());
  } catch (const json::exception&) {
    throw FormatError("sidecar missing string", "topology");
  } catch (const ParameterError&) {
    throw FormatError("unknown topology", "topology");
  }
  out.time = side.value("time", 0.0);
  out.metric.x = t.columns[0];
  out.metric.phi = t.columns[1];
  out.metric.psi = t.columns[2];
  try {
    validate(out.metric, pole_tolerance);
  } catch (const Error& e) {
    throw FormatError(e.what(), csv.string());
  }
  return out;
}

}  // namespace riccilab
