#include "riccilab/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "riccilab/errors.hpp"
#include "riccilab/heatflow.hpp"

namespace riccilab {

void check_options(const FlowOptions& opts) {
  if (!(opts.cfl > 0.0 && opts.cfl <= 1.0)) throw ParameterError("cfl must lie in (0, 1]");
  if (!(opts.t_end > 0.0)) throw ParameterError("t_end must be positive");
  if (opts.store_every == 0) throw ParameterError("store_every must be positive");
  if (!(opts.regrid_threshold > 1.0)) throw ParameterError("regrid_threshold must exceed 1");
}

FlowRate flow_rate(const WarpedMetric& g) {
  const Geometry geo = analyze(g, false);
  const std::size_t m = g.size();
  FlowRate r;
  r.phi_t.resize(m);
  r.psi_t.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    r.phi_t[i] = -geo.curvature.Ric_rad[i] * g.phi[i];
    r.psi_t[i] = geo.pole[i] ? 0.0 : -geo.curvature.Ric_sph[i] * g.psi[i];
  }
  return r;
}

double spacing_ratio(const WarpedMetric& g) {
  const auto [lo, hi] = std::minmax_element(g.phi.begin(), g.phi.end());
  return *hi / *lo;
}

double stable_dt(const WarpedMetric& g, double cfl) {
  const Geometry geo = analyze(g, false);
  const double ds = *std::min_element(g.phi.begin(), g.phi.end()) * g.spacing();
  double kmax = 0.0;
  for (double k : geo.curvature.rm_norm(g.n)) kmax = std::max(kmax, k);
  return cfl * ds * ds / (2.0 * std::max(1.0, kmax * ds * ds));
}

namespace {

// Integration state. The profile is carried on a grid that is uniform in
// arclength (phi = L), which keeps the poles well posed; `s` holds the
// arclength positions of the material nodes so that snapshots can be
// returned in material coordinates, where the metric obeys the plain flow.
struct GaugeState {
  int n = 3;
  Topology topology = Topology::sphere;
  double L = 0.0;
  std::vector<double> psi;
  std::vector<double> s;
};

struct GaugeRate {
  double L_t = 0.0;
  std::vector<double> psi_t;
  std::vector<double> s_t;
};

WarpedMetric gauge_metric(const GaugeState& st) {
  WarpedMetric g;
  g.n = st.n;
  g.topology = st.topology;
  g.x = make_grid(st.topology, st.psi.size());
  g.phi.assign(st.psi.size(), st.L);
  g.psi = st.psi;
  return g;
}

GaugeState to_gauge(const WarpedMetric& g) {
  GaugeState st;
  st.n = g.n;
  st.topology = g.topology;
  const WarpedMetric u = regrid_uniform_arclength(g);
  st.L = u.phi.front();
  st.psi = u.psi;
  st.s = arclength(g);
  return st;
}

WarpedMetric to_material(const GaugeState& st) {
  const std::size_t m = st.psi.size();
  WarpedMetric g;
  g.n = st.n;
  g.topology = st.topology;
  g.x = make_grid(st.topology, m);
  const double h = g.spacing();
  // s - y L vanishes at the poles (and is periodic), so it has odd symmetry.
  std::vector<double> d(m);
  for (std::size_t j = 0; j < m; ++j) d[j] = st.s[j] - g.x[j] * st.L;
  const auto d_y = derivative(d, 1, Parity::odd, st.topology, h);
  g.phi.resize(m);
  g.psi.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    g.phi[j] = st.L + d_y[j];
    g.psi[j] = g.is_pole(j) ? 0.0 : interpolate(st.psi, st.s[j] / st.L, Parity::odd, st.topology, h);
  }
  return g;
}

GaugeRate gauge_rate(const GaugeState& st) {
  const WarpedMetric g = gauge_metric(st);
  const Geometry geo = analyze(g, false);
  const std::size_t m = g.size();
  const double h = g.spacing();
  const auto& ric = geo.curvature.Ric_rad;
  // I(x) = int_0^{xL} Ric_rad ds by the corrected trapezoid rule.
  const auto ric_x = derivative(ric, 1, Parity::even, g.topology, h);
  std::vector<double> I(m + 1, 0.0);
  const std::size_t intervals = g.topology == Topology::periodic ? m : m - 1;
  for (std::size_t i = 0; i < intervals; ++i) {
    const std::size_t j = (i + 1) % m;
    I[i + 1] = I[i] + st.L * (0.5 * h * (ric[i] + ric[j]) - h * h / 12.0 * (ric_x[j] - ric_x[i]));
  }
  const double I_total = I[intervals];
  // J = I - x I(L) is odd about both ends; it is the drift that keeps the grid
  // uniform in arclength.
  std::vector<double> J(m);
  for (std::size_t i = 0; i < m; ++i) J[i] = I[i] - g.x[i] * I_total;

  GaugeRate r;
  r.L_t = -I_total;
  r.psi_t.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    r.psi_t[i] = geo.pole[i] ? 0.0 : -geo.curvature.Ric_sph[i] * st.psi[i] + geo.psi_s[i] * J[i];
  }
  r.s_t.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double x = st.s[j] / st.L;
    r.s_t[j] = -(interpolate(J, x, Parity::odd, g.topology, h) + x * I_total);
  }
  return r;
}

// The flow preserves psi_s = +-1 at the poles, but the linearization has a
// (psi_s - 1)/s term that amplifies any discrete drift of that slope; pin it
// by solving the pole derivative stencil (odd reflection) for the first node.
void enforce_pole_slope(GaugeState& st) {
  if (st.topology == Topology::periodic) return;
  const std::size_t m = st.psi.size();
  const double h = 1.0 / (static_cast<double>(m) - 1.0);
  // (16 psi_1 - 2 psi_2) / (12 h) = L at x = 0.
  st.psi[1] = (12.0 * h * st.L + 2.0 * st.psi[2]) / 16.0;
  if (st.topology == Topology::sphere) st.psi[m - 2] = (12.0 * h * st.L + 2.0 * st.psi[m - 3]) / 16.0;
}

void check_gauge(const GaugeState& st) {
  if (!std::isfinite(st.L) || !(st.L > 0.0)) throw NumericError("length lost positivity", st.L);
  const std::size_t m = st.psi.size();
  const bool periodic = st.topology == Topology::periodic;
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::isfinite(st.psi[i]) || !std::isfinite(st.s[i])) {
      throw NumericError("non-finite value after step", std::numeric_limits<double>::infinity());
    }
    const bool pole = !periodic && (i == 0 || (st.topology == Topology::sphere && i + 1 == m));
    if (!pole && !(st.psi[i] >= kPositivityFloor)) {
      throw NearSingularError("interior psi below positivity floor");
    }
    if (i > 0 && !(st.s[i] > st.s[i - 1])) throw NumericError("material nodes crossed", st.s[i] - st.s[i - 1]);
  }
  if (periodic && !(st.s.back() < st.s.front() + st.L)) throw NumericError("material nodes crossed", 0.0);
}

GaugeState heun(const GaugeState& st, double dt) {
  const std::size_t m = st.psi.size();
  const GaugeRate k1 = gauge_rate(st);
  GaugeState mid = st;
  mid.L += dt * k1.L_t;
  for (std::size_t i = 0; i < m; ++i) {
    mid.psi[i] += dt * k1.psi_t[i];
    mid.s[i] += dt * k1.s_t[i];
  }
  enforce_pole_slope(mid);
  check_gauge(mid);
  const GaugeRate k2 = gauge_rate(mid);
  GaugeState out = st;
  out.L += 0.5 * dt * (k1.L_t + k2.L_t);
  for (std::size_t i = 0; i < m; ++i) {
    out.psi[i] += 0.5 * dt * (k1.psi_t[i] + k2.psi_t[i]);
    out.s[i] += 0.5 * dt * (k1.s_t[i] + k2.s_t[i]);
  }
  enforce_pole_slope(out);
  check_gauge(out);
  return out;
}

double gauge_dt(const GaugeState& st, double cfl) {
  const WarpedMetric g = gauge_metric(st);
  return stable_dt(g, cfl);
}

double interior_min_psi(const std::vector<double>& psi, Topology topology) {
  double mn = std::numeric_limits<double>::infinity();
  const std::size_t m = psi.size();
  for (std::size_t i = 0; i < m; ++i) {
    const bool pole = topology != Topology::periodic && (i == 0 || (topology == Topology::sphere && i + 1 == m));
    if (!pole) mn = std::min(mn, psi[i]);
  }
  return mn;
}

}  // namespace

WarpedMetric ricci_step(const WarpedMetric& g, double dt) {
  if (!(dt >= 0.0)) throw ParameterError("dt must be nonnegative");
  if (dt == 0.0) return g;
  if (g.topology == Topology::ball) throw ParameterError("ball metrics cannot be flowed");
  return to_material(heun(to_gauge(g), dt));
}

FlowHistory run(const WarpedMetric& g0, const FlowOptions& opts) {
  check_options(opts);
  if (g0.topology == Topology::ball) throw ParameterError("ball metrics are static models and cannot be flowed");
  validate(g0, 1e-2);

  FlowHistory h;
  Termination term;
  GaugeState st = to_gauge(g0);
  double t = 0.0;
  h.append(t, g0);
  std::size_t last_stored_step = 0;
  bool pending_epoch = false;
  const double psi0 = interior_min_psi(st.psi, st.topology);

  auto store = [&](std::size_t step) {
    if (h.t_last() < t) {
      h.append(t, to_material(st), pending_epoch);
      pending_epoch = false;
    }
    last_stored_step = step;
  };

  std::size_t step = 0;
  try {
    while (true) {
      if (t >= opts.t_end) {
        term.status = "ok";
        term.reason = "reached t_end";
        break;
      }
      if (step >= opts.max_steps) {
        term.status = "max_steps";
        term.reason = "step budget exhausted";
        break;
      }
      double dt = gauge_dt(st, opts.cfl);
      bool last_step = false;
      if (dt >= opts.t_end - t - 1e-14 * opts.t_end) {
        dt = opts.t_end - t;
        last_step = true;
      }
      GaugeState next;
      bool accepted = false;
      std::string last_error;
      for (int halving = 0; halving <= opts.max_halvings; ++halving) {
        try {
          next = heun(st, dt);
          accepted = true;
          break;
        } catch (const Error& e) {
          last_error = e.what();
          dt *= 0.5;
          last_step = false;
        }
      }
      if (!accepted) {
        term.status = "near_singular";
        term.reason = "step rejected after repeated halving: " + last_error;
        break;
      }
      st = std::move(next);
      t = last_step ? opts.t_end : t + dt;
      ++step;
      if (interior_min_psi(st.psi, st.topology) < opts.psi_collapse_ratio * psi0) {
        term.status = "near_singular";
        term.reason = "interior psi collapsed";
        break;
      }
      const auto rm = curvature(gauge_metric(st)).rm_norm(st.n);
      if (*std::max_element(rm.begin(), rm.end()) > opts.curvature_cap) {
        term.status = "near_singular";
        term.reason = "curvature exceeded cap";
        break;
      }
      if (step - last_stored_step >= opts.store_every) store(step);
      const WarpedMetric mat = to_material(st);
      if (spacing_ratio(mat) > opts.regrid_threshold) {
        store(step);
        st.s = arclength(gauge_metric(st));
        pending_epoch = true;
      }
    }
  } catch (const Error& e) {
    term.status = "failed";
    term.reason = e.what();
  }
  if (h.t_last() < t) {
    try {
      h.append(t, to_material(st), pending_epoch);
    } catch (const Error&) {
    }
  }
  term.t_final = t;
  term.steps = step;
  h.termination = term;
  return h;
}

std::vector<ScalarField> evolve_potential(const FlowHistory& h, const ScalarField& f_terminal,
                                          std::optional<double> tau_terminal) {
  if (h.empty()) throw ParameterError("empty history");
  const std::size_t last = h.size() - 1;
  const WarpedMetric& gT = h.snapshot(last);
  if (f_terminal.values.size() != gT.size()) {
    throw ParameterError("potential must live on the last snapshot");
  }
  if (tau_terminal && !(*tau_terminal > 0.0)) throw ParameterError("terminal tau must be positive");
  const int n = h.n();
  auto log_prefactor = [&](double t) {
    if (!tau_terminal) return 0.0;
    const double tau = *tau_terminal + h.t_last() - t;
    return -0.5 * n * std::log(4.0 * std::numbers::pi * tau);
  };
  // Shift f so that u stays O(1); the equation for u is linear.
  const double shift = *std::min_element(f_terminal.values.begin(), f_terminal.values.end());
  std::vector<double> uT(gT.size());
  for (std::size_t i = 0; i < uT.size(); ++i) uT[i] = std::exp(-(f_terminal.values[i] - shift));

  const ConjugateSolution sol = solve_conjugate_from(h, h.t_last(), uT);
  std::vector<ScalarField> out;
  out.reserve(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) {
    const auto& u = sol.u.at(k);
    ScalarField f{std::vector<double>(u.size()), FieldRole::potential};
    if (k == last) {
      f.values = f_terminal.values;
    } else {
      for (std::size_t i = 0; i < u.size(); ++i) {
        if (!(u[i] > 0.0)) throw NumericError("potential density lost positivity", u[i]);
        // u carries no prefactor; tau only enters through the n/2tau source.
        f.values[i] = shift - std::log(u[i]) + log_prefactor(h.times()[k]) -
                      log_prefactor(h.t_last());
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace riccilab
