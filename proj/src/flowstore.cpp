#include "riccilab/flowstore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <set>

#include "riccilab/detail/pchip.hpp"
#include "riccilab/errors.hpp"
#include "riccilab/metric_io.hpp"

namespace riccilab {

namespace fs = std::filesystem;
using nlohmann::json;

// Evolved snapshots carry discretization drift at the poles.
constexpr double kSnapshotPoleTolerance = 1e-2;

WarpedMetric regrid_uniform_arclength(const WarpedMetric& g) {
  const std::size_t m = g.size();
  const double h = g.spacing();
  const bool periodic = g.topology == Topology::periodic;
  // Arclength at the nodes, with the wrap-around end for periodic grids.
  auto s = arclength(g);
  std::vector<double> xs = g.x;
  if (periodic) {
    const auto phi_x = derivative(g.phi, 1, Parity::even, g.topology, h);
    s.push_back(s.back() + 0.5 * h * (g.phi.back() + g.phi.front()) -
                h * h / 12.0 * (phi_x.front() - phi_x.back()));
    xs.push_back(1.0);
  }
  const double length = s.back();
  auto s_copy = s;
  boost::math::interpolators::pchip<std::vector<double>> x_of_s(std::move(s_copy), std::move(xs));
  WarpedMetric out = g;
  out.x = make_grid(g.topology, m);
  out.phi.assign(m, length);
  for (std::size_t j = 0; j < m; ++j) {
    if (g.is_pole(j)) {
      out.psi[j] = 0.0;
      continue;
    }
    const double target = out.x[j] * length;
    const double x_old = std::clamp(x_of_s(target), 0.0, 1.0);
    out.psi[j] = interpolate(g.psi, x_old, Parity::odd, g.topology, h);
  }
  return out;
}

int FlowHistory::n() const {
  if (metrics_.empty()) throw RangeError("empty history");
  return metrics_.front().n;
}

Topology FlowHistory::topology() const {
  if (metrics_.empty()) throw RangeError("empty history");
  return metrics_.front().topology;
}

void FlowHistory::append(double time, WarpedMetric g, bool new_epoch) {
  if (!times_.empty()) {
    if (!(time > times_.back())) throw ParameterError("history times must increase strictly");
    if (g.n != n() || g.topology != topology()) {
      throw ParameterError("snapshots must share n and topology");
    }
    if (!new_epoch && g.size() != metrics_.back().size()) {
      throw ParameterError("grid size changed without a regrid event");
    }
    if (new_epoch) regrid_events_.push_back({times_.back(), times_.size()});
  } else if (new_epoch) {
    throw ParameterError("first snapshot cannot start a new epoch");
  }
  times_.push_back(time);
  metrics_.push_back(std::move(g));
}

int FlowHistory::epoch(std::size_t k) const {
  int e = 0;
  for (const auto& ev : regrid_events_) {
    if (ev.first_snapshot <= k) ++e;
  }
  return e;
}

WarpedMetric FlowHistory::at(double t) const {
  if (times_.empty()) throw RangeError("empty history");
  if (!(t >= times_.front() && t <= times_.back())) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "t = %.17g outside [%.17g, %.17g]", t, times_.front(),
                  times_.back());
    throw RangeError(buf);
  }
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  std::size_t k = static_cast<std::size_t>(it - times_.begin());
  if (*it == t) return metrics_[k];
  const std::size_t k0 = k - 1;
  const double w = (t - times_[k0]) / (times_[k] - times_[k0]);
  const WarpedMetric& b = metrics_[k];
  const WarpedMetric a = epoch(k0) == epoch(k) ? metrics_[k0] : regrid_uniform_arclength(metrics_[k0]);
  WarpedMetric out = b;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.phi[i] = std::sqrt((1.0 - w) * a.phi[i] * a.phi[i] + w * b.phi[i] * b.phi[i]);
    out.psi[i] = std::sqrt((1.0 - w) * a.psi[i] * a.psi[i] + w * b.psi[i] * b.psi[i]);
  }
  return out;
}

bool FlowHistory::has_regrid_in(double t0, double t1) const {
  for (const auto& ev : regrid_events_) {
    const double t_new = times_[ev.first_snapshot];
    if (t_new > t0 && ev.time < t1) return true;
  }
  return false;
}

FlowHistory FlowHistory::truncated(double t_max) const {
  FlowHistory out;
  for (std::size_t k = 0; k < times_.size() && times_[k] <= t_max; ++k) {
    out.append(times_[k], metrics_[k], k > 0 && epoch(k) != epoch(k - 1));
  }
  return out;
}

namespace {

std::string snapshot_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snap-%06zu.csv", k);
  return buf;
}

}  // namespace

void save_history(const FlowHistory& h, const fs::path& dir) {
  if (h.empty()) throw ParameterError("cannot save an empty history");
  fs::create_directories(dir);
  json manifest;
  manifest["n"] = h.n();
  manifest["topology"] = to_string(h.topology());
  manifest["times"] = h.times();
  json files = json::array();
  for (std::size_t k = 0; k < h.size(); ++k) {
    const std::string name = snapshot_name(k);
    write_metric(dir / name, h.snapshot(k), h.times()[k]);
    files.push_back(name);
  }
  manifest["files"] = files;
  json events = json::array();
  for (const auto& ev : h.regrid_events()) {
    events.push_back({{"time", ev.time}, {"first_snapshot", ev.first_snapshot}});
  }
  manifest["regrid_events"] = events;
  if (h.termination) {
    manifest["status"] = h.termination->status;
    manifest["t_final"] = h.termination->t_final;
    manifest["reason"] = h.termination->reason;
    manifest["steps"] = h.termination->steps;
  }
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

FlowHistory load_history(const fs::path& dir, std::vector<std::string>* warnings) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw FormatError("history has no manifest", mpath.string());
  json manifest;
  try {
    manifest = json::parse(read_text(mpath));
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what(), mpath.string());
  }
  if (!manifest.is_object()) throw FormatError("manifest must be an object", mpath.string());
  static const std::set<std::string> known = {"n",      "topology", "times", "files",
                                              "regrid_events", "status", "t_final",
                                              "reason", "steps"};
  for (const auto& [key, value] : manifest.items()) {
    if (!known.count(key) && warnings) warnings->push_back("ignoring unknown manifest key '" + key + "'");
  }
  auto require = [&](const char* key) -> const json& {
    if (!manifest.contains(key)) throw FormatError("manifest missing key", key);
    return manifest[key];
  };
  int n = 0;
  Topology topology{};
  std::vector<double> times;
  std::vector<std::string> files;
  try {
    n = require("n").get<int>();
  } catch (const json::type_error&) {
    throw FormatError("manifest key has wrong type", "n");
  }
  try {
    topology = topology_from_string(require("topology").get<std::string>());
  } catch (const json::type_error&) {
    throw FormatError("manifest key has wrong type", "topology");
  } catch (const ParameterError&) {
    throw FormatError("unknown topology", "topology");
  }
  try {
    times = require("times").get<std::vector<double>>();
  } catch (const json::type_error&) {
    throw FormatError("manifest key has wrong type", "times");
  }
  try {
    files = require("files").get<std::vector<std::string>>();
  } catch (const json::type_error&) {
    throw FormatError("manifest key has wrong type", "files");
  }
  if (times.size() != files.size() || times.empty()) {
    throw FormatError("times and files must be nonempty and equally long", "files");
  }
  std::set<std::size_t> epoch_starts;
  if (manifest.contains("regrid_events")) {
    try {
      for (const auto& ev : manifest["regrid_events"]) {
        epoch_starts.insert(ev.at("first_snapshot").get<std::size_t>());
      }
    } catch (const json::exception&) {
      throw FormatError("malformed regrid event", "regrid_events");
    }
  }
  FlowHistory h;
  for (std::size_t k = 0; k < files.size(); ++k) {
    const fs::path p = dir / files[k];
    if (!fs::exists(p)) throw FormatError("snapshot listed in manifest is missing", files[k]);
    LoadedMetric lm = read_metric(p, kSnapshotPoleTolerance);
    if (lm.metric.n != n || lm.metric.topology != topology) {
      throw FormatError("snapshot disagrees with manifest n/topology", files[k]);
    }
    try {
      h.append(times[k], std::move(lm.metric), epoch_starts.count(k) > 0);
    } catch (const ParameterError& e) {
      throw FormatError(e.what(), "times");
    }
  }
  if (manifest.contains("status")) {
    Termination term;
    try {
      term.status = manifest["status"].get<std::string>();
      term.t_final = manifest.value("t_final", h.t_last());
      term.reason = manifest.value("reason", std::string());
      term.steps = manifest.value("steps", std::size_t{0});
    } catch (const json::exception&) {
      throw FormatError("malformed termination record", "status");
    }
    h.termination = term;
  }
  return h;
}

}  // namespace riccilab
