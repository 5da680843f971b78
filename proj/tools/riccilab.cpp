#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "riccilab/diagnostics.hpp"
#include "riccilab/errors.hpp"
#include "riccilab/flow.hpp"
#include "riccilab/flowstore.hpp"
#include "riccilab/functionals.hpp"
#include "riccilab/geometry.hpp"
#include "riccilab/heatflow.hpp"
#include "riccilab/lgeodesics.hpp"
#include "riccilab/metric_io.hpp"
#include "riccilab/monitors.hpp"
#include "riccilab/parallel.hpp"
#include "riccilab/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace riccilab;

namespace {

constexpr int kOk = 0;
constexpr int kFlagged = 1;
constexpr int kUsage = 2;
constexpr int kConfig = 64;

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

// Doubles that may be infinite (kappa with no admissible ball) go out as null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

FlowHistory open_history(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) throw ConfigError("history not found", dir.string());
  return load_history(dir);
}

std::vector<double> read_field(const fs::path& csv, const std::string& column) {
  if (!fs::exists(csv)) throw ConfigError("file not found", csv.string());
  return read_table(csv).column(column);
}

// ---- geom ------------------------------------------------------------------

struct GeomArgs {
  std::string kind = "sphere";
  int n = 3;
  std::size_t m = 256;
  double radius = 1.0;
  double neck_radius = 0.5;
  double bump_radius = 1.0;
  double length = 2.0 * std::acos(-1.0);
  double time = 0.0;
  std::string in, out;
};

int geom_build(const GeomArgs& a) {
  WarpedMetric g;
  if (a.kind == "sphere") g = build_round_sphere(a.n, a.radius, a.m);
  else if (a.kind == "dumbbell") g = build_dumbbell(a.n, a.neck_radius, a.bump_radius, a.m);
  else if (a.kind == "cylinder") g = build_cylinder(a.n, a.radius, a.length, a.m);
  else if (a.kind == "flat_ball") g = build_flat_ball(a.n, a.radius, a.m);
  else throw ParameterError("unknown kind '" + a.kind + "'");
  write_metric(a.out, g, a.time);
  return kOk;
}

int geom_curvature(const GeomArgs& a) {
  const auto loaded = read_metric(a.in);
  const auto& g = loaded.metric;
  const Geometry geo = analyze(g);
  const auto s = arclength(g);
  const auto& c = geo.curvature;
  write_table(a.out, {"x", "s", "K_rad", "K_sph", "Ric_rad", "Ric_sph", "R"},
              {g.x, s, c.K_rad, c.K_sph, c.Ric_rad, c.Ric_sph, c.R});
  return kOk;
}

// ---- flow ------------------------------------------------------------------

struct FlowArgs {
  std::string in, out;
  FlowOptions opts;
};

int flow_run(const FlowArgs& a) {
  const auto loaded = read_metric(a.in);
  FlowHistory h = run(loaded.metric, a.opts);
  save_history(h, a.out);
  const auto& term = *h.termination;
  std::printf("%s t_final=%s steps=%zu snapshots=%zu (%s)\n", term.status.c_str(),
              format_double(term.t_final).c_str(), term.steps, h.size(), term.reason.c_str());
  return term.status == "ok" ? kOk : kFlagged;
}

// ---- functional ------------------------------------------------------------

struct FunctionalArgs {
  std::string which, in, f, out;
  double tau = 0.0;
  int jobs = 1;
};

json entropy_json(const EntropyReport& r) {
  return {{"value", r.value},
          {"tau", r.tau},
          {"constraint_residual", r.constraint_residual},
          {"solver_residual", r.solver_residual},
          {"iterations", r.iterations}};
}

int functional_eval(const FunctionalArgs& a) {
  const auto g = read_metric(a.in).metric;
  auto potential = [&]() {
    if (a.f.empty()) throw ParameterError("--f is required for " + a.which);
    ScalarField f{read_field(a.f, "f"), FieldRole::potential};
    if (f.values.size() != g.size()) throw ParameterError("--f does not match the metric grid");
    return f;
  };
  auto need_tau = [&]() {
    if (!(a.tau > 0.0)) throw ParameterError("--tau > 0 is required for " + a.which);
  };
  json r = {{"which", a.which}};
  if (a.which == "F") {
    const auto f = potential();
    r["value"] = eval_F(g, f);
    r["rate"] = F_rate(g, f);
  } else if (a.which == "W") {
    need_tau();
    const auto f = potential();
    r.update(entropy_json(eval_W(g, f, a.tau)));
    r["rate"] = W_rate(g, f, a.tau);
  } else if (a.which == "lambda") {
    r.update(entropy_json(lambda(g)));
  } else if (a.which == "lambdabar") {
    r["value"] = lambda_bar(g);
  } else if (a.which == "mu") {
    need_tau();
    r.update(entropy_json(mu(g, a.tau)));
  } else if (a.which == "nu") {
    NuOptions o;
    o.jobs = a.jobs;
    const auto res = nu(g, o);
    r["value"] = res.value;
    r["tau"] = res.tau;
    r["at_bracket_edge"] = res.at_bracket_edge;
  } else if (a.which == "thermo") {
    need_tau();
    const ScalarField f = a.f.empty() ? *mu(g, a.tau).minimizer : potential();
    const Thermo th = thermo(g, f, a.tau);
    r["logZ"] = th.logZ;
    r["E_avg"] = th.E_avg;
    r["S"] = th.S;
    r["sigma"] = th.sigma;
    r["mass"] = th.mass;
  } else {
    throw ParameterError("unknown functional '" + a.which + "'");
  }
  write_json(a.out, r);
  return kOk;
}

// ---- conjheat --------------------------------------------------------------

struct HeatArgs {
  std::string history, u, out, which = "v";
  double T = -1.0;
  double width = 0.0;
  double window = 0.25;
  double tol = 1e-2;
  int paths = 10;
  int times = 5;
};

void save_solution(const ConjugateSolution& sol, const WarpedMetric& grid, const fs::path& dir) {
  fs::create_directories(dir);
  json files = json::array();
  for (std::size_t k = 0; k < sol.times.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "u-%06zu.csv", k);
    write_table(dir / name, {"x", "u"}, {grid.x, sol.u[k]});
    files.push_back(name);
  }
  write_json(dir / "manifest.json", {{"T", sol.T},
                                     {"epsilon", sol.epsilon},
                                     {"times", sol.times},
                                     {"mass", sol.mass},
                                     {"files", files}});
}

ConjugateSolution load_solution(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw ConfigError("solution not found", dir.string());
  ConjugateSolution sol;
  try {
    const json m = json::parse(read_text(mpath));
    sol.T = m.at("T").get<double>();
    sol.epsilon = m.at("epsilon").get<double>();
    sol.times = m.at("times").get<std::vector<double>>();
    sol.mass = m.at("mass").get<std::vector<double>>();
    for (const auto& f : m.at("files")) sol.u.push_back(read_field(dir / f.get<std::string>(), "u"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed solution manifest (") + e.what() + ")", mpath.string());
  }
  if (sol.u.size() != sol.times.size()) throw ConfigError("files and times differ in length", mpath.string());
  return sol;
}

int conjheat_run(const HeatArgs& a) {
  const FlowHistory h = open_history(a.history);
  const double T = a.T < 0.0 ? h.t_last() : a.T;
  const auto sol = solve_conjugate(h, T, a.width);
  save_solution(sol, h.at(sol.times.front()), a.out);
  return kOk;
}

int conjheat_check(const HeatArgs& a) {
  const FlowHistory h = open_history(a.history);
  const ConjugateSolution sol = load_solution(a.u);
  const double cutoff = sol.T - a.window * (sol.T - h.t_first());
  json r = {{"which", a.which}, {"T", sol.T}, {"tol", a.tol}};
  bool ok = true;
  if (a.which == "v" || a.which == "minvu") {
    const auto fields = harnack_v(h, sol);
    json rows = json::array();
    double max_v = -std::numeric_limits<double>::infinity();
    double prev_max = -std::numeric_limits<double>::infinity(), prev_min = prev_max;
    bool max_mono = true, min_mono = true;
    for (const auto& f : fields) {
      if (f.t > cutoff) continue;
      max_v = std::max(max_v, f.max_v);
      max_mono = max_mono && f.max_v_over_u >= prev_max - a.tol;
      min_mono = min_mono && f.min_v_over_u >= prev_min - a.tol;
      prev_max = f.max_v_over_u;
      prev_min = f.min_v_over_u;
      rows.push_back({{"t", f.t}, {"max_v", f.max_v}, {"min_v_over_u", f.min_v_over_u},
                      {"max_v_over_u", f.max_v_over_u}});
    }
    r["samples"] = rows;
    r["max_v"] = max_v;
    r["min_v_over_u_nondecreasing"] = min_mono;
    r["max_v_over_u_nondecreasing"] = max_mono;
    ok = a.which == "v" ? max_v <= a.tol : min_mono;
  } else if (a.which == "curve") {
    json rows = json::array();
    const double t0 = h.t_first(), t1 = cutoff;
    for (int p = 0; p < a.paths; ++p) {
      const double start = (p + 0.5) / a.paths;
      const double end = 1.0 - start;
      const AxisPath path = [=](double t) { return start + (end - start) * (t - t0) / (t1 - t0); };
      const auto rep = curve_harnack_check(h, sol, path, a.tol);
      double min_slack = std::numeric_limits<double>::infinity();
      std::size_t violations = 0;
      for (const auto& s : rep.samples) {
        if (s.t > cutoff) continue;
        min_slack = std::min(min_slack, s.slack);
        violations += s.slack < -a.tol;
      }
      ok = ok && violations == 0;
      rows.push_back({{"x_start", start}, {"x_end", end}, {"min_slack", num(min_slack)}, {"violations", violations}});
    }
    r["paths"] = rows;
  } else if (a.which == "fvsl") {
    std::vector<double> times;
    for (double t : sol.times) {
      if (t <= cutoff) times.push_back(t);
    }
    if (times.empty()) throw ParameterError("no output times inside the window");
    std::vector<double> pick;
    for (int i = 0; i < a.times; ++i) {
      pick.push_back(times[static_cast<std::size_t>(i * (times.size() - 1) / std::max(1, a.times - 1))]);
    }
    const ReducedDistanceAt l_at = [&](double t) { return reduced_distance_field(h, sol.T, sol.T - t).l; };
    const auto rep = f_vs_l_check(h, sol, l_at, pick, a.tol);
    json rows = json::array();
    for (const auto& s : rep.samples) rows.push_back({{"t", s.t}, {"max_excess", s.max_excess}});
    r["samples"] = rows;
    r["max_excess"] = rep.max_excess;
    ok = rep.violations.empty();
  } else {
    throw ParameterError("unknown check '" + a.which + "'");
  }
  r["verdict"] = ok ? "holds" : "violated";
  if (!a.out.empty()) write_json(a.out, r);
  else std::cout << r.dump(2) << "\n";
  return ok ? kOk : kFlagged;
}

// ---- lgeo ------------------------------------------------------------------

struct LgeoArgs {
  std::string history, out;
  double t0 = -1.0;
  double tau_bar = 0.0;
  std::vector<double> taus;
  LOptions opts;
};

int lgeo_field(const LgeoArgs& a) {
  const FlowHistory h = open_history(a.history);
  const double t0 = a.t0 < 0.0 ? h.t_last() : a.t0;
  const auto f = reduced_distance_field(h, t0, a.tau_bar, a.opts);
  const auto vol = reduced_volume(f, f.g, a.opts.coverage_threshold);
  std::vector<int> covered(f.covered.begin(), f.covered.end()), kink(f.kink.begin(), f.kink.end());
  json r = {{"t0", t0},           {"tau_bar", f.tau_bar}, {"x", f.g.x},         {"L", f.L},
            {"l", f.l},           {"Lbar", f.Lbar},       {"covered", covered}, {"kink", kink},
            {"coverage", f.coverage}, {"min_l", f.min_l}, {"vtilde", vol.value}, {"flagged", vol.flagged}};
  // Uncovered nodes hold non-finite values; JSON has no infinity.
  for (const char* key : {"L", "l", "Lbar"}) {
    for (auto& v : r[key]) {
      if (!std::isfinite(v.get<double>())) v = nullptr;
    }
  }
  write_json(a.out, r);
  return kOk;
}

int lgeo_vtilde(const LgeoArgs& a) {
  const FlowHistory h = open_history(a.history);
  const double t0 = a.t0 < 0.0 ? h.t_last() : a.t0;
  if (a.taus.empty()) throw ParameterError("--tau-list is empty");
  const LFan fan = shoot_fan(h, t0, a.taus, a.opts);
  std::vector<double> v, cov, minl;
  bool flagged = false;
  for (const auto& f : fan.fields) {
    const auto vol = reduced_volume(f, f.g, a.opts.coverage_threshold);
    flagged = flagged || vol.flagged;
    v.push_back(vol.value);
    cov.push_back(f.coverage);
    minl.push_back(f.min_l);
  }
  write_table(a.out, {"tau", "vtilde", "coverage", "min_l"}, {fan.taus, v, cov, minl});
  return flagged ? kFlagged : kOk;
}

int lgeo_identities(const LgeoArgs& a) {
  const FlowHistory h = open_history(a.history);
  const double t0 = a.t0 < 0.0 ? h.t_last() : a.t0;
  const auto rep = identity_suite(h, t0, a.taus, 1.1, a.opts);
  json levels = json::array();
  for (const auto& l : rep.levels) {
    levels.push_back({{"tau_bar", l.tau_bar},
                      {"res_Ltau", l.res_Ltau},
                      {"res_gradL", l.res_gradL},
                      {"slack_lapL", l.slack_lapL},
                      {"slack_l_heat", l.slack_l_heat},
                      {"slack_l_elliptic", l.slack_l_elliptic},
                      {"slack_Lbar", l.slack_Lbar},
                      {"weak_l_heat", l.weak_l_heat},
                      {"weak_l_elliptic", l.weak_l_elliptic},
                      {"min_l", l.min_l},
                      {"excluded", l.excluded},
                      {"checked", l.checked}});
  }
  write_json(a.out, {{"t0", t0},
                     {"levels", levels},
                     {"max_res_Ltau", rep.max_res_Ltau},
                     {"max_res_gradL", rep.max_res_gradL},
                     {"min_slack", rep.min_slack},
                     {"min_weak", rep.min_weak},
                     {"max_harnack_gap", rep.max_harnack_gap}});
  return kOk;
}

// ---- diagnose --------------------------------------------------------------

struct DiagArgs {
  std::string in, out;
  double rho = 1.0;
  double T = -1.0;
  double eps = 0.05;
  double t = 0.0;
  double r0 = 0.0;
  double r_lo = 0.0, r_hi = 0.0;
  int radii = 64;
  int jobs = 1;
};

int diagnose_kappa(const DiagArgs& a) {
  const auto g = read_metric(a.in).metric;
  const auto r = kappa_scan(g, a.rho, {a.radii, a.jobs});
  write_json(a.out, {{"rho", a.rho}, {"kappa", num(r.kappa)}, {"admissible_found", r.admissible_found},
                     {"center", r.center}, {"x", g.x[r.center]}, {"radius", r.radius}, {"volume", r.volume}});
  return kOk;
}

int diagnose_collapse(const DiagArgs& a) {
  const FlowHistory h = open_history(a.in);
  const auto r = collapse_detector(h, a.T < 0.0 ? h.t_last() : a.T, 1e-3, {a.radii, a.jobs});
  json kappa = json::array();
  for (double k : r.kappa) kappa.push_back(num(k));
  write_json(a.out, {{"scale", r.scale}, {"times", r.times}, {"kappa", kappa}, {"min_kappa", num(r.min_kappa)},
                     {"bounded_away", r.bounded_away}, {"note", r.note}});
  return kOk;
}

int diagnose_neck(const DiagArgs& a) {
  const auto g = read_metric(a.in).metric;
  json centers = json::array();
  for (const auto& c : neck_detect(g, a.eps)) {
    centers.push_back({{"node", c.node}, {"x", c.x}, {"closeness", c.closeness}});
  }
  write_json(a.out, {{"eps", a.eps}, {"count", centers.size()}, {"centers", centers}});
  return kOk;
}

int diagnose_distlemma(const DiagArgs& a) {
  const FlowHistory h = open_history(a.in);
  DistanceLemmaReport r;
  if (a.r0 > 0.0) {
    r = distance_lemma_check(h, a.t, a.r0);
  } else {
    const double len = arclength(h.at(a.t)).back();
    r = distance_lemma_best_pair(h, a.t, a.r_lo > 0.0 ? a.r_lo : 0.02 * len, a.r_hi > 0.0 ? a.r_hi : 0.5 * len);
  }
  json out = {{"t", r.t}, {"r0", r.r0}, {"K", r.K_measured}, {"min_slack_local", r.min_slack_local},
              {"worst_node", r.worst_node}, {"checked", r.checked}};
  if (r.pair_slack) {
    out["pair_rate"] = *r.pair_rate;
    out["pair_slack"] = *r.pair_slack;
  }
  write_json(a.out, out);
  return kOk;
}

// ---- monitor / scenario ----------------------------------------------------

struct MonitorArgs {
  std::string history, which, out;
  MonitorConfig config;
};

int monitor_run(MonitorArgs a) {
  const FlowHistory h = open_history(a.history);
  a.config.which = monitor_from_string(a.which);
  const auto s = record(h, a.config);
  write_monitor_csv(s, a.out);
  std::printf("%s: %s (%zu samples, %zu violations)\n", s.name.c_str(), s.overall.c_str(), s.t.size(),
              s.violations.size());
  return s.overall == "violated" ? kFlagged : kOk;
}

int scenario_run(const std::string& file, std::string out, int jobs) {
  if (out.empty()) out = fs::path(file).stem().string() + ".out";
  const auto o = run_scenario(file, out, jobs);
  std::printf("%s: %s (config %s) -> %s\n", o.name.c_str(), o.verdict.c_str(), o.config_hash.c_str(),
              o.report.string().c_str());
  return o.verdict == "holds" ? kOk : kFlagged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ricci flow laboratory for warped products over spheres"};
  app.require_subcommand(1);
  app.fallthrough();
  int jobs = default_jobs();
  app.add_option("--jobs", jobs, "Worker threads (default: RICCI_LAB_JOBS or 1)")->check(CLI::PositiveNumber);
  std::function<int()> action;

  GeomArgs geom;
  auto* geom_cmd = app.add_subcommand("geom", "Build metrics and inspect curvature");
  geom_cmd->require_subcommand(1);
  auto* gb = geom_cmd->add_subcommand("build", "Write a model metric");
  gb->add_option("--kind", geom.kind, "sphere | dumbbell | cylinder | flat_ball")->required();
  gb->add_option("--n", geom.n, "Dimension");
  gb->add_option("--m", geom.m, "Grid size");
  gb->add_option("--radius", geom.radius);
  gb->add_option("--neck-radius", geom.neck_radius);
  gb->add_option("--bump-radius", geom.bump_radius);
  gb->add_option("--length", geom.length);
  gb->add_option("--time", geom.time, "Time written to the sidecar");
  gb->add_option("--out", geom.out, "metric.csv")->required();
  gb->callback([&] { action = [&] { return geom_build(geom); }; });
  auto* gc = geom_cmd->add_subcommand("curvature", "Write curvature profiles");
  gc->add_option("--in", geom.in)->required();
  gc->add_option("--out", geom.out)->required();
  gc->callback([&] { action = [&] { return geom_curvature(geom); }; });

  FlowArgs flow;
  auto* flow_cmd = app.add_subcommand("flow", "Evolve a metric");
  flow_cmd->require_subcommand(1);
  auto* fr = flow_cmd->add_subcommand("run", "Run the flow and store a history");
  fr->add_option("--in", flow.in)->required();
  fr->add_option("--t-end", flow.opts.t_end)->required();
  fr->add_option("--cfl", flow.opts.cfl);
  fr->add_option("--store-every", flow.opts.store_every);
  fr->add_option("--regrid-threshold", flow.opts.regrid_threshold);
  fr->add_option("--max-steps", flow.opts.max_steps);
  fr->add_option("--out", flow.out, "History directory")->required();
  fr->callback([&] { action = [&] { return flow_run(flow); }; });

  FunctionalArgs fn;
  auto* fn_cmd = app.add_subcommand("functional", "Entropy functionals");
  fn_cmd->require_subcommand(1);
  auto* fe = fn_cmd->add_subcommand("eval", "Evaluate one functional");
  fe->add_option("--which", fn.which, "F | W | lambda | lambdabar | mu | nu | thermo")->required();
  fe->add_option("--in", fn.in)->required();
  fe->add_option("--tau", fn.tau);
  fe->add_option("--f", fn.f, "CSV with a column f on the metric grid");
  fe->add_option("--out", fn.out)->required();
  fe->callback([&] {
    fn.jobs = jobs;
    action = [&] { return functional_eval(fn); };
  });

  HeatArgs heat;
  auto* heat_cmd = app.add_subcommand("conjheat", "Conjugate heat equation and Harnack checks");
  heat_cmd->require_subcommand(1);
  auto* hr = heat_cmd->add_subcommand("run", "Solve from a Gaussian at the pole");
  hr->add_option("--history", heat.history)->required();
  hr->add_option("--T", heat.T, "Terminal time (default: last stored time)");
  hr->add_option("--width", heat.width, "Gaussian width in arclength (0: four cells)");
  hr->add_option("--out", heat.out)->required();
  hr->callback([&] { action = [&] { return conjheat_run(heat); }; });
  auto* hc = heat_cmd->add_subcommand("check", "Harnack quantities of a stored solution");
  hc->add_option("--history", heat.history)->required();
  hc->add_option("--u", heat.u)->required();
  hc->add_option("--which", heat.which, "v | minvu | curve | fvsl")->required();
  hc->add_option("--tol", heat.tol);
  hc->add_option("--window", heat.window, "Skip times within this fraction of the span before T");
  hc->add_option("--paths", heat.paths);
  hc->add_option("--times", heat.times);
  hc->add_option("--out", heat.out);
  hc->callback([&] { action = [&] { return conjheat_check(heat); }; });

  LgeoArgs lg;
  auto* lg_cmd = app.add_subcommand("lgeo", "L-geodesics, reduced distance and volume");
  lg_cmd->require_subcommand(1);
  auto add_lopts = [&](CLI::App* c) {
    c->add_option("--history", lg.history)->required();
    c->add_option("--t0", lg.t0, "Base time (default: last stored time)");
    c->add_option("--fan-size", lg.opts.fan_size);
    c->add_option("--ode-steps", lg.opts.ode_steps);
    c->add_option("--out", lg.out)->required();
  };
  auto* lf = lg_cmd->add_subcommand("field", "Reduced distance at one tau_bar");
  add_lopts(lf);
  lf->add_option("--tau-bar", lg.tau_bar)->required();
  lf->callback([&] {
    lg.opts.jobs = jobs;
    action = [&] { return lgeo_field(lg); };
  });
  auto* lv = lg_cmd->add_subcommand("vtilde", "Reduced volume over a tau list");
  add_lopts(lv);
  lv->add_option("--tau-list", lg.taus)->required()->delimiter(',');
  lv->callback([&] {
    lg.opts.jobs = jobs;
    action = [&] { return lgeo_vtilde(lg); };
  });
  auto* li = lg_cmd->add_subcommand("identities", "Identity and inequality suite over a tau list");
  add_lopts(li);
  li->add_option("--tau-list", lg.taus)->required()->delimiter(',');
  li->callback([&] {
    lg.opts.jobs = jobs;
    action = [&] { return lgeo_identities(lg); };
  });

  DiagArgs dg;
  auto* dg_cmd = app.add_subcommand("diagnose", "Non-collapsing, necks and the distance lemma");
  dg_cmd->require_subcommand(1);
  auto* dk = dg_cmd->add_subcommand("kappa", "kappa at scale rho on one metric");
  dk->add_option("--in", dg.in)->required();
  dk->add_option("--rho", dg.rho)->required();
  dk->add_option("--radii", dg.radii);
  dk->add_option("--out", dg.out)->required();
  dk->callback([&] {
    dg.jobs = jobs;
    action = [&] { return diagnose_kappa(dg); };
  });
  auto* dc = dg_cmd->add_subcommand("collapse", "kappa along a history");
  dc->add_option("--in", dg.in, "History directory")->required();
  dc->add_option("--T", dg.T);
  dc->add_option("--radii", dg.radii);
  dc->add_option("--out", dg.out)->required();
  dc->callback([&] {
    dg.jobs = jobs;
    action = [&] { return diagnose_collapse(dg); };
  });
  auto* dn = dg_cmd->add_subcommand("neck", "Neck centers on one metric");
  dn->add_option("--in", dg.in)->required();
  dn->add_option("--eps", dg.eps);
  dn->add_option("--out", dg.out)->required();
  dn->callback([&] { action = [&] { return diagnose_neck(dg); }; });
  auto* dd = dg_cmd->add_subcommand("distlemma", "Distance lemma from the pole");
  dd->add_option("--in", dg.in, "History directory")->required();
  dd->add_option("--t", dg.t);
  dd->add_option("--r0", dg.r0, "Fixed r0 (default: tightest pole-pair r0)");
  dd->add_option("--r-lo", dg.r_lo);
  dd->add_option("--r-hi", dg.r_hi);
  dd->add_option("--out", dg.out)->required();
  dd->callback([&] { action = [&] { return diagnose_distlemma(dg); }; });

  MonitorArgs mon;
  auto* mon_cmd = app.add_subcommand("monitor", "Monotonicity monitor along a history");
  mon_cmd->add_option("--history", mon.history)->required();
  mon_cmd->add_option("--which", mon.which, "lambda | lambdabar | F | W | nu | vtilde | minLbar | minvu | maxvu")
      ->required();
  mon_cmd->add_option("--every", mon.config.every);
  mon_cmd->add_option("--c1", mon.config.c1);
  mon_cmd->add_option("--c2", mon.config.c2);
  mon_cmd->add_option("--tau-terminal", mon.config.tau_terminal);
  mon_cmd->add_option("--f-terminal", mon.config.f_terminal, "minimizer | constant");
  mon_cmd->add_option("--t0", mon.config.t0);
  mon_cmd->add_option("--tau-lo", mon.config.tau_lo);
  mon_cmd->add_option("--tau-hi", mon.config.tau_hi);
  mon_cmd->add_option("--tau-count", mon.config.tau_count);
  mon_cmd->add_option("--T", mon.config.T);
  mon_cmd->add_option("--out", mon.out)->required();
  mon_cmd->callback([&] {
    mon.config.jobs = jobs;
    action = [&] { return monitor_run(mon); };
  });

  std::string scenario_file, scenario_out;
  auto* sc_cmd = app.add_subcommand("scenario", "Declarative pipelines");
  sc_cmd->require_subcommand(1);
  auto* sr = sc_cmd->add_subcommand("run", "Run a scenario file");
  sr->add_option("file", scenario_file)->required();
  sr->add_option("--out", scenario_out, "Output directory (default: <stem>.out)");
  sr->callback([&] { action = [&] { return scenario_run(scenario_file, scenario_out, jobs); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kUsage;
  }
  try {
    return action();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConstructionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const RangeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << " (residual " << e.residual() << ")\n";
    return kFlagged;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return kFlagged;
  }
}
