#include "riccilab/scenario.hpp"

#include <boost/version.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <limits>
#include <optional>
#include <set>

#include "riccilab/diagnostics.hpp"
#include "riccilab/flow.hpp"
#include "riccilab/flowstore.hpp"
#include "riccilab/geometry.hpp"
#include "riccilab/heatflow.hpp"
#include "riccilab/lgeodesics.hpp"
#include "riccilab/metric_io.hpp"
#include "riccilab/monitors.hpp"
#include "riccilab/parallel.hpp"

namespace riccilab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void allow_keys(const json& obj, const std::set<std::string>& keys, const std::string& where) {
  if (!obj.is_object()) throw ConfigError("expected an object", where);
  for (const auto& [k, v] : obj.items()) {
    if (!keys.count(k)) throw ConfigError("unknown key", where + "." + k);
  }
}

template <class T>
T get_or(const json& obj, const std::string& key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("wrong type", where + "." + key);
  }
}

template <class T>
T require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError("missing key", where + "." + key);
  return get_or<T>(obj, key, T{}, where);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

WarpedMetric build_metric(const json& spec, const fs::path& base) {
  const std::string where = "metric";
  allow_keys(spec, {"kind", "n", "m", "radius", "neck_radius", "bump_radius", "length", "path"}, where);
  const std::string kind = require<std::string>(spec, "kind", where);
  const int n = get_or<int>(spec, "n", 3, where);
  const auto m = get_or<std::size_t>(spec, "m", 256, where);
  if (kind == "sphere") return build_round_sphere(n, get_or<double>(spec, "radius", 1.0, where), m);
  if (kind == "dumbbell") {
    return build_dumbbell(n, get_or<double>(spec, "neck_radius", 0.5, where),
                          get_or<double>(spec, "bump_radius", 1.0, where), m);
  }
  if (kind == "cylinder") {
    return build_cylinder(n, get_or<double>(spec, "radius", 1.0, where),
                          get_or<double>(spec, "length", 2.0 * std::acos(-1.0), where), m);
  }
  if (kind == "flat_ball") return build_flat_ball(n, get_or<double>(spec, "radius", 1.0, where), m);
  if (kind == "file") {
    const fs::path p = resolve(base, require<std::string>(spec, "path", where));
    if (!fs::exists(p)) throw ConfigError("metric file not found", p.string());
    return read_metric(p).metric;
  }
  throw ConfigError("unknown metric kind '" + kind + "'", where + ".kind");
}

FlowOptions flow_options(const json& spec) {
  const std::string where = "flow";
  allow_keys(spec, {"t_end", "cfl", "store_every", "regrid_threshold", "max_steps"}, where);
  FlowOptions o;
  o.t_end = require<double>(spec, "t_end", where);
  o.cfl = get_or<double>(spec, "cfl", o.cfl, where);
  o.store_every = get_or<std::size_t>(spec, "store_every", o.store_every, where);
  o.regrid_threshold = get_or<double>(spec, "regrid_threshold", o.regrid_threshold, where);
  o.max_steps = get_or<std::size_t>(spec, "max_steps", o.max_steps, where);
  return o;
}

LOptions lgeo_options(const json& spec, const std::string& where) {
  LOptions o;
  o.fan_size = get_or<int>(spec, "fan_size", o.fan_size, where);
  o.ode_steps = get_or<int>(spec, "ode_steps", o.ode_steps, where);
  o.v_ratio = get_or<double>(spec, "v_ratio", o.v_ratio, where);
  o.coverage_threshold = get_or<double>(spec, "coverage_threshold", o.coverage_threshold, where);
  return o;
}

struct MonitorJob {
  std::string file;
  MonitorConfig config;
};

MonitorJob monitor_job(const json& spec, const json& tolerance, std::size_t index) {
  const std::string where = "monitors[" + std::to_string(index) + "]";
  allow_keys(spec,
             {"which", "name", "every", "tau_terminal", "f_terminal", "t0", "tau_lo", "tau_hi", "tau_count",
              "fan_size", "ode_steps", "v_ratio", "coverage_threshold", "T", "width", "heat_window", "c1", "c2",
              "match_rel"},
             where);
  MonitorJob job;
  MonitorConfig& c = job.config;
  const std::string which = require<std::string>(spec, "which", where);
  try {
    c.which = monitor_from_string(which);
  } catch (const ParameterError&) {
    throw ConfigError("unknown monitor '" + which + "'", where + ".which");
  }
  job.file = get_or<std::string>(spec, "name", which, where) + ".csv";
  c.every = get_or<std::size_t>(spec, "every", c.every, where);
  c.c1 = get_or<double>(spec, "c1", get_or<double>(tolerance, "c1", c.c1, "tolerance"), where);
  c.c2 = get_or<double>(spec, "c2", get_or<double>(tolerance, "c2", c.c2, "tolerance"), where);
  c.match_rel =
      get_or<double>(spec, "match_rel", get_or<double>(tolerance, "match_rel", c.match_rel, "tolerance"), where);
  c.tau_terminal = get_or<double>(spec, "tau_terminal", c.tau_terminal, where);
  c.f_terminal = get_or<std::string>(spec, "f_terminal", c.f_terminal, where);
  c.t0 = get_or<double>(spec, "t0", c.t0, where);
  c.tau_lo = get_or<double>(spec, "tau_lo", c.tau_lo, where);
  c.tau_hi = get_or<double>(spec, "tau_hi", c.tau_hi, where);
  c.tau_count = get_or<int>(spec, "tau_count", c.tau_count, where);
  c.lgeo = lgeo_options(spec, where);
  c.T = get_or<double>(spec, "T", c.T, where);
  c.width = get_or<double>(spec, "width", c.width, where);
  c.heat_window = get_or<double>(spec, "heat_window", c.heat_window, where);
  return job;
}

json violations_json(const MonitorSeries& s) {
  json out = json::array();
  for (const auto& v : s.violations) out.push_back({{"t", v.t}, {"slack", v.slack}, {"relative", v.relative}});
  return out;
}

const char* verdict(bool ok) { return ok ? "holds" : "violated"; }

// R on a round sphere of radius r0 at t = 0: n(n-1) / (r0^2 - 2(n-1) t).
json check_sphere_oracle(const FlowHistory& h, const json& spec, const std::string& where) {
  allow_keys(spec, {"kind", "tol"}, where);
  const double tol = get_or<double>(spec, "tol", 1e-3, where);
  if (h.topology() != Topology::sphere) throw ConfigError("sphere_oracle needs sphere topology", where);
  const int n = h.n();
  const auto R0 = curvature(h.snapshot(0)).R;
  double mean = 0.0;
  for (double r : R0) mean += r;
  mean /= static_cast<double>(R0.size());
  const double r2 = n * (n - 1) / mean + 2.0 * (n - 1) * h.t_first();
  double worst = 0.0, worst_t = h.t_first();
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double t = h.times()[k];
    const double exact = n * (n - 1) / (r2 - 2.0 * (n - 1) * t);
    for (double r : curvature(h.snapshot(k)).R) {
      const double e = std::abs(r - exact) / exact;
      if (e > worst) {
        worst = e;
        worst_t = t;
      }
    }
  }
  return {{"kind", "sphere_oracle"}, {"max_relative_error", worst}, {"at_t", worst_t}, {"tol", tol},
          {"verdict", verdict(worst < tol)}};
}

json check_neck(const FlowHistory& h, const json& spec, const std::string& where) {
  allow_keys(spec, {"kind", "eps", "t", "expect"}, where);
  const double eps = get_or<double>(spec, "eps", 0.05, where);
  const double t = get_or<double>(spec, "t", h.t_last(), where);
  const std::string expect = get_or<std::string>(spec, "expect", "none", where);
  if (expect != "none" && expect != "some") throw ConfigError("expect must be 'none' or 'some'", where + ".expect");
  const auto centers = neck_detect(h.at(t), eps);
  const bool ok = expect == "none" ? centers.empty() : !centers.empty();
  return {{"kind", "neck"}, {"eps", eps}, {"t", t}, {"expect", expect}, {"centers", centers.size()},
          {"verdict", verdict(ok)}};
}

json check_collapse(const FlowHistory& h, const json& spec, const std::string& where, int jobs) {
  allow_keys(spec, {"kind", "floor_ratio", "radii"}, where);
  KappaOptions ko;
  ko.radii = get_or<int>(spec, "radii", ko.radii, where);
  ko.jobs = jobs;
  const auto rep = collapse_detector(h, h.t_last(), get_or<double>(spec, "floor_ratio", 1e-3, where), ko);
  return {{"kind", "collapse"},        {"scale", rep.scale},         {"min_kappa", rep.min_kappa},
          {"first_kappa", rep.kappa.empty() ? 0.0 : rep.kappa.front()},
          {"floor_ratio", rep.floor_ratio}, {"verdict", verdict(rep.bounded_away)}};
}

json check_distlemma(const FlowHistory& h, const json& spec, const std::string& where) {
  allow_keys(spec, {"kind", "times", "r_lo", "r_hi", "count", "tol"}, where);
  const double tol = get_or<double>(spec, "tol", 1e-6, where);
  const auto times = get_or<std::vector<double>>(spec, "times", {h.t_first()}, where);
  const int count = get_or<int>(spec, "count", 64, where);
  json rows = json::array();
  bool ok = true;
  for (double t : times) {
    const double len = arclength(h.at(t)).back();
    const double r_lo = get_or<double>(spec, "r_lo", 0.02 * len, where);
    const double r_hi = get_or<double>(spec, "r_hi", 0.5 * len, where);
    const auto rep = distance_lemma_best_pair(h, t, r_lo, r_hi, count);
    const bool row_ok = rep.min_slack_local >= -tol && *rep.pair_slack >= -tol;
    ok = ok && row_ok;
    rows.push_back({{"t", t},
                    {"r0", rep.r0},
                    {"K", rep.K_measured},
                    {"pair_rate", *rep.pair_rate},
                    {"pair_slack", *rep.pair_slack},
                    {"min_slack_local", rep.min_slack_local},
                    {"verdict", verdict(row_ok)}});
  }
  return {{"kind", "distlemma"}, {"tol", tol}, {"times", rows}, {"verdict", verdict(ok)}};
}

json check_harnack(const FlowHistory& h, const json& spec, const std::string& where) {
  allow_keys(spec, {"kind", "T", "width", "window", "tol"}, where);
  const double T = get_or<double>(spec, "T", h.t_last(), where);
  const double window = get_or<double>(spec, "window", 0.25, where);
  const double tol = get_or<double>(spec, "tol", 1e-2, where);
  const auto sol = solve_conjugate(h, T, get_or<double>(spec, "width", 0.0, where));
  const auto fields = harnack_v(h, sol);
  const double cutoff = T - window * (T - h.t_first());
  double max_v = -kInf;
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (sol.times[k] <= cutoff) max_v = std::max(max_v, fields[k].max_v);
  }
  return {{"kind", "harnack"}, {"T", T}, {"max_v", max_v}, {"tol", tol}, {"verdict", verdict(max_v <= tol)}};
}

json check_reduced_distance(const FlowHistory& h, const json& spec, const std::string& where, int jobs) {
  allow_keys(spec, {"kind", "t0", "tau_lo", "tau_hi", "tau_count", "tol", "fan_size", "ode_steps", "v_ratio",
                    "coverage_threshold"},
             where);
  const double t0 = get_or<double>(spec, "t0", h.t_last(), where);
  const double tol = get_or<double>(spec, "tol", 1e-6, where);
  const double hi = get_or<double>(spec, "tau_hi", 0.9 * (t0 - h.t_first()), where);
  const auto taus = geometric_ladder(get_or<double>(spec, "tau_lo", 1e-3, where), hi,
                                     get_or<int>(spec, "tau_count", 20, where));
  LOptions lo = lgeo_options(spec, where);
  lo.jobs = jobs;
  const LFan fan = shoot_fan(h, t0, taus, lo);
  const double bound = 0.5 * h.n();
  double worst = -kInf, min_cov = kInf;
  for (const auto& f : fan.fields) {
    worst = std::max(worst, f.min_l - bound);
    min_cov = std::min(min_cov, f.coverage);
  }
  return {{"kind", "reduced_distance"},
          {"t0", t0},
          {"max_min_l_minus_half_n", worst},
          {"min_coverage", min_cov},
          {"tol", tol},
          {"verdict", verdict(worst <= tol)}};
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string config_hash(const std::string& config_text) {
  json cfg;
  try {
    cfg = json::parse(config_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("not valid JSON (") + e.what() + ")", "<config>");
  }
  const std::string canon = cfg.dump();
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : canon) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

ScenarioOutcome run_scenario_text(const std::string& config_text, const fs::path& base_dir,
                                  const fs::path& out_dir, int jobs) {
  const std::string started = utc_now();
  json cfg;
  try {
    cfg = json::parse(config_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("not valid JSON (") + e.what() + ")", "<config>");
  }
  allow_keys(cfg, {"name", "metric", "history", "flow", "tolerance", "monitors", "checks"}, "scenario");
  ScenarioOutcome out;
  out.name = require<std::string>(cfg, "name", "scenario");
  out.config_hash = config_hash(config_text);
  const json tolerance = cfg.value("tolerance", json::object());
  allow_keys(tolerance, {"c1", "c2", "match_rel"}, "tolerance");

  // Validate every section before any expensive work.
  std::vector<MonitorJob> monitors;
  const json mons = cfg.value("monitors", json::array());
  if (!mons.is_array()) throw ConfigError("expected an array", "monitors");
  std::set<std::string> files;
  for (std::size_t i = 0; i < mons.size(); ++i) {
    monitors.push_back(monitor_job(mons[i], tolerance, i));
    if (!files.insert(monitors.back().file).second) {
      throw ConfigError("duplicate monitor output (set \"name\")", "monitors[" + std::to_string(i) + "]");
    }
  }
  const json checks = cfg.value("checks", json::array());
  if (!checks.is_array()) throw ConfigError("expected an array", "checks");
  static const std::set<std::string> check_kinds = {"sphere_oracle", "neck", "collapse", "distlemma", "harnack",
                                                    "reduced_distance"};
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const std::string where = "checks[" + std::to_string(i) + "]";
    if (!checks[i].is_object()) throw ConfigError("expected an object", where);
    const std::string kind = require<std::string>(checks[i], "kind", where);
    if (!check_kinds.count(kind)) throw ConfigError("unknown check '" + kind + "'", where + ".kind");
  }
  if (cfg.contains("history") == cfg.contains("metric")) {
    throw ConfigError("exactly one of \"metric\" and \"history\" is required", "scenario");
  }
  if (cfg.contains("metric") && !cfg.contains("flow")) throw ConfigError("\"metric\" needs \"flow\"", "scenario");

  fs::create_directories(out_dir);
  FlowHistory h;
  json flow_report;
  if (cfg.contains("history")) {
    const fs::path dir = resolve(base_dir, get_or<std::string>(cfg, "history", "", "scenario"));
    if (!fs::exists(dir / "manifest.json")) throw ConfigError("history not found", dir.string());
    h = load_history(dir);
    flow_report = {{"source", get_or<std::string>(cfg, "history", "", "scenario")}};
  } else {
    const WarpedMetric g0 = build_metric(cfg["metric"], base_dir);
    const FlowOptions fo = flow_options(cfg["flow"]);
    h = run(g0, fo);
    save_history(h, out_dir / "history");
    out.outputs.push_back("history/manifest.json");
    for (std::size_t k = 0; k < h.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "history/snap-%06zu.csv", k);
      out.outputs.push_back(name);
    }
    flow_report = {{"source", "flow"}};
  }
  if (h.empty()) throw ConfigError("history holds no snapshots", "history");
  if (h.termination) {
    out.flow_status = h.termination->status;
    flow_report["status"] = h.termination->status;
    flow_report["t_final"] = h.termination->t_final;
    flow_report["reason"] = h.termination->reason;
    flow_report["steps"] = h.termination->steps;
  } else {
    out.flow_status = "ok";
  }
  flow_report["snapshots"] = h.size();

  // Monitors read the history concurrently; each one runs single threaded.
  std::vector<MonitorSeries> series(monitors.size());
  parallel_for(monitors.size(), jobs, [&](std::size_t i) { series[i] = record(h, monitors[i].config); });
  fs::create_directories(out_dir / "monitors");
  json mon_report = json::array();
  bool all_ok = true;
  for (std::size_t i = 0; i < monitors.size(); ++i) {
    const std::string rel = "monitors/" + monitors[i].file;
    write_monitor_csv(series[i], out_dir / rel);
    out.outputs.push_back(rel);
    // vacuous counts as a pass: the claim has no content on this history.
    all_ok = all_ok && series[i].overall != "violated";
    mon_report.push_back({{"which", to_string(monitors[i].config.which)},
                          {"csv", rel},
                          {"samples", series[i].t.size()},
                          {"verdict", series[i].overall},
                          {"violations", violations_json(series[i])}});
  }

  json check_report = json::array();
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const std::string where = "checks[" + std::to_string(i) + "]";
    const json& c = checks[i];
    const std::string kind = c["kind"].get<std::string>();
    json r;
    if (kind == "sphere_oracle") r = check_sphere_oracle(h, c, where);
    else if (kind == "neck") r = check_neck(h, c, where);
    else if (kind == "collapse") r = check_collapse(h, c, where, jobs);
    else if (kind == "distlemma") r = check_distlemma(h, c, where);
    else if (kind == "harnack") r = check_harnack(h, c, where);
    else r = check_reduced_distance(h, c, where, jobs);
    all_ok = all_ok && r["verdict"] == "holds";
    check_report.push_back(r);
  }

  out.verdict = all_ok ? "holds" : "violated";
  json report = {{"name", out.name},       {"config_hash", out.config_hash}, {"flow", flow_report},
                 {"monitors", mon_report}, {"checks", check_report},         {"verdict", out.verdict}};
  out.report = out_dir / "report.json";
  write_json(out.report, report);
  out.outputs.push_back("report.json");

  json manifest = {{"name", out.name},
                   {"config_hash", out.config_hash},
                   {"versions",
                    {{"riccilab", RICCILAB_VERSION},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                     {"boost", BOOST_LIB_VERSION},
                     {"compiler", __VERSION__}}},
                   {"config", cfg},
                   {"outputs", out.outputs},
                   {"timestamps", "timestamps.json"},
                   {"verdict", out.verdict}};
  out.manifest = out_dir / "manifest.json";
  write_json(out.manifest, manifest);
  write_json(out_dir / "timestamps.json", {{"started", started}, {"finished", utc_now()}});
  return out;
}

ScenarioOutcome run_scenario(const fs::path& config_file, const fs::path& out_dir, int jobs) {
  if (!fs::exists(config_file)) throw ConfigError("scenario file not found", config_file.string());
  std::string text;
  try {
    text = read_text(config_file);
  } catch (const Error&) {
    throw ConfigError("cannot read scenario file", config_file.string());
  }
  return run_scenario_text(text, config_file.parent_path(), out_dir, jobs);
}

}  // namespace riccilab
