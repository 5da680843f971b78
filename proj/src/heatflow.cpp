#include "riccilab/heatflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "riccilab/errors.hpp"
#include "riccilab/tridiag.hpp"

namespace riccilab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Control volumes and face conductances of one metric.
struct FvLevel {
  std::vector<double> volume;
  std::vector<double> conductance;
  bool cyclic = false;
};

FvLevel fv_level(const WarpedMetric& g) {
  FvWeights fv = fv_weights(g);
  return {std::move(fv.cell_volume), std::move(fv.face_conductance),
          g.topology == Topology::periodic};
}

// (A u)_i = sum over faces of a (u_j - u_i).
std::vector<double> apply_laplace(const FvLevel& lv, const std::vector<double>& u) {
  const std::size_t m = u.size();
  std::vector<double> out(m, 0.0);
  for (std::size_t f = 0; f < lv.conductance.size(); ++f) {
    const std::size_t j = (f + 1) % m;
    const double flux = lv.conductance[f] * (u[j] - u[f]);
    out[f] += flux;
    out[j] -= flux;
  }
  return out;
}

// diag(volume) - c A as a symmetric tridiagonal matrix.
SymTridiag implicit_matrix(const FvLevel& lv, double c) {
  const std::size_t m = lv.volume.size();
  SymTridiag a;
  a.cyclic = lv.cyclic;
  a.diag = lv.volume;
  a.off.assign(m, 0.0);
  for (std::size_t f = 0; f < lv.conductance.size(); ++f) {
    const std::size_t j = (f + 1) % m;
    a.diag[f] += c * lv.conductance[f];
    a.diag[j] += c * lv.conductance[f];
    a.off[f] = -c * lv.conductance[f];
  }
  return a;
}

double min_spacing(const WarpedMetric& g) {
  return *std::min_element(g.phi.begin(), g.phi.end()) * g.spacing();
}

double auto_dtau(const FlowHistory& h, double t0, double T, const ConjugateOptions& opts) {
  if (opts.dtau_max > 0.0) return opts.dtau_max;
  double ds = std::min(min_spacing(h.at(t0)), min_spacing(h.at(T)));
  return 2.0 * ds * ds;
}

void check_window(const FlowHistory& h, double t0, double t1) {
  if (h.empty()) throw ParameterError("empty history");
  if (!(t0 >= h.t_first() && t1 <= h.t_last())) throw RangeError("time window outside the history");
  if (h.has_regrid_in(t0, t1)) {
    throw ParameterError("time window contains a regrid event; restrict the history first");
  }
}

double pairing(const FvLevel& lv, const std::vector<double>& u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += lv.volume[i] * u[i];
  return acc;
}

// Nodes whose whole derivative stencil sits inside {u > threshold max u}.
std::vector<char> support_mask(const std::vector<double>& u, Topology topology, int reach) {
  const long m = static_cast<long>(u.size());
  const double umax = *std::max_element(u.begin(), u.end());
  std::vector<char> inside(m), mask(m, 0);
  for (long i = 0; i < m; ++i) inside[i] = u[i] > kSupportThreshold * umax;
  for (long i = 0; i < m; ++i) {
    bool ok = inside[i];
    for (long k = -reach; ok && k <= reach; ++k) {
      long j = i + k;
      if (topology == Topology::periodic) {
        j = ((j % m) + m) % m;
      } else {
        if (j < 0) j = -j;
        if (j > m - 1) j = topology == Topology::sphere ? 2 * (m - 1) - j : m - 1;
      }
      ok = inside[j];
    }
    mask[i] = ok;
  }
  return mask;
}

}  // namespace

std::vector<double> default_output_times(const FlowHistory& h, double T) {
  std::vector<double> out;
  for (double t : h.times()) {
    if (t < T) out.push_back(t);
  }
  out.push_back(T);
  return out;
}

ConjugateSolution solve_conjugate_from(const FlowHistory& h, double T, std::vector<double> u_T,
                                       std::vector<double> output_times,
                                       const ConjugateOptions& opts) {
  if (h.empty()) throw ParameterError("empty history");
  if (output_times.empty()) output_times = default_output_times(h, T);
  std::sort(output_times.begin(), output_times.end());
  output_times.erase(std::unique(output_times.begin(), output_times.end()), output_times.end());
  if (output_times.back() > T) throw ParameterError("output times must not exceed T");
  if (output_times.back() < T) output_times.push_back(T);
  check_window(h, output_times.front(), T);

  const WarpedMetric gT = h.at(T);
  if (u_T.size() != gT.size()) throw ParameterError("terminal data does not match the grid");
  const double dtau = auto_dtau(h, output_times.front(), T, opts);

  ConjugateSolution sol;
  sol.T = T;
  sol.times = output_times;
  sol.u.resize(output_times.size());
  sol.mass.resize(output_times.size());

  FvLevel level = fv_level(gT);
  std::vector<double> u = std::move(u_T);
  double t = T;
  sol.u.back() = u;
  sol.mass.back() = pairing(level, u);
  for (std::size_t k = output_times.size() - 1; k-- > 0;) {
    const double target = output_times[k];
    const auto steps = static_cast<std::size_t>(std::ceil((t - target) / dtau - 1e-9));
    const double d = (t - target) / static_cast<double>(std::max<std::size_t>(steps, 1));
    for (std::size_t s = 0; s < steps; ++s) {
      const double t_new = s + 1 == steps ? target : t - d;
      FvLevel next = fv_level(h.at(t_new));
      const auto au = apply_laplace(level, u);
      std::vector<double> rhs(u.size());
      for (std::size_t i = 0; i < u.size(); ++i) rhs[i] = level.volume[i] * u[i] + 0.5 * d * au[i];
      u = solve(implicit_matrix(next, 0.5 * d), rhs);
      level = std::move(next);
      t = t_new;
    }
    sol.u[k] = u;
    sol.mass[k] = pairing(level, u);
  }
  return sol;
}

ConjugateSolution solve_conjugate(const FlowHistory& h, double T, double delta_width,
                                  std::size_t center, std::vector<double> output_times,
                                  const ConjugateOptions& opts) {
  if (h.empty()) throw ParameterError("empty history");
  if (!(T >= h.t_first() && T <= h.t_last())) throw RangeError("T outside the history");
  const WarpedMetric gT = h.at(T);
  if (center >= gT.size()) throw ParameterError("delta center outside the grid");
  const double width = delta_width > 0.0 ? delta_width : 4.0 * min_spacing(gT);
  const double eps = width * width;
  const auto s = arclength(gT);
  double length = s.back();
  if (gT.topology == Topology::periodic) length += gT.phi.back() * gT.spacing();
  std::vector<double> u(gT.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    double d = std::abs(s[i] - s[center]);
    if (gT.topology == Topology::periodic) d = std::min(d, length - d);
    u[i] = std::exp(-d * d / (4.0 * eps));
  }
  const double mass = pairing(fv_level(gT), u);
  for (double& v : u) v /= mass;
  ConjugateSolution sol = solve_conjugate_from(h, T, std::move(u), std::move(output_times), opts);
  sol.epsilon = eps;
  return sol;
}

std::vector<std::vector<double>> solve_forward_heat(const FlowHistory& h, std::vector<double> h0,
                                                    const std::vector<double>& times,
                                                    const ConjugateOptions& opts) {
  if (times.empty()) throw ParameterError("no output times");
  if (!std::is_sorted(times.begin(), times.end())) throw ParameterError("times must ascend");
  check_window(h, times.front(), times.back());
  const double dt = auto_dtau(h, times.front(), times.back(), opts);
  FvLevel level = fv_level(h.at(times.front()));
  if (h0.size() != level.volume.size()) throw ParameterError("initial data does not match the grid");
  std::vector<std::vector<double>> out{h0};
  std::vector<double> u = std::move(h0);
  double t = times.front();
  for (std::size_t k = 1; k < times.size(); ++k) {
    const auto steps = static_cast<std::size_t>(std::ceil((times[k] - t) / dt - 1e-9));
    const double d = (times[k] - t) / static_cast<double>(std::max<std::size_t>(steps, 1));
    for (std::size_t s = 0; s < steps; ++s) {
      const double t_new = s + 1 == steps ? times[k] : t + d;
      FvLevel next = fv_level(h.at(t_new));
      // Exact transpose of the conjugate step, so sum h u V is preserved to
      // roundoff: implicit half on the earlier level, explicit half on the later.
      std::vector<double> rhs(u.size());
      for (std::size_t i = 0; i < u.size(); ++i) rhs[i] = level.volume[i] * u[i];
      const auto y = solve(implicit_matrix(level, 0.5 * d), rhs);
      const auto ay = apply_laplace(next, y);
      for (std::size_t i = 0; i < u.size(); ++i) u[i] = y[i] + 0.5 * d * ay[i] / next.volume[i];
      level = std::move(next);
      t = t_new;
    }
    out.push_back(u);
  }
  return out;
}

std::vector<double> kernel_potential(const ConjugateSolution& sol, std::size_t k, int n) {
  const double tau = sol.tau_eff(k);
  const double log_norm = 0.5 * n * std::log(4.0 * std::numbers::pi * tau);
  const auto& u = sol.u.at(k);
  std::vector<double> f(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    f[i] = u[i] > 0.0 ? -std::log(u[i]) - log_norm : std::numeric_limits<double>::infinity();
  }
  return f;
}

namespace {

// Potential with the tails (u at or below the support threshold) replaced by
// a finite cap so that stencils near the support edge stay finite.
std::vector<double> capped_potential(const ConjugateSolution& sol, std::size_t k, int n) {
  auto f = kernel_potential(sol, k, n);
  const auto& u = sol.u[k];
  const double umax = *std::max_element(u.begin(), u.end());
  const double cap = -std::log(kSupportThreshold * umax) -
                     0.5 * n * std::log(4.0 * std::numbers::pi * sol.tau_eff(k));
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!(u[i] > kSupportThreshold * umax)) f[i] = cap;
  }
  return f;
}

struct HarnackLevel {
  WarpedMetric g;
  Geometry geo;
  std::vector<double> f;
  ScalarDerivatives df;
  std::vector<double> v;
  std::vector<char> mask;
};

HarnackLevel harnack_level(const FlowHistory& h, const ConjugateSolution& sol, std::size_t k) {
  HarnackLevel L;
  L.g = h.at(sol.times[k]);
  L.geo = analyze(L.g);
  L.f = capped_potential(sol, k, L.g.n);
  L.df = differentiate(L.geo, L.f);
  const double tau = sol.tau_eff(k);
  const auto& u = sol.u[k];
  L.v.resize(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double grad2 = L.df.ds[i] * L.df.ds[i];
    const double ratio =
        tau * (2.0 * L.df.laplacian[i] - grad2 + L.geo.curvature.R[i]) + L.f[i] - L.g.n;
    L.v[i] = ratio * std::max(u[i], 0.0);
  }
  L.mask = support_mask(u, L.g.topology, 3);
  return L;
}

}  // namespace

std::vector<HarnackField> harnack_v(const FlowHistory& h, const ConjugateSolution& sol) {
  std::vector<HarnackField> out;
  for (std::size_t k = 0; k < sol.times.size(); ++k) {
    HarnackLevel L = harnack_level(h, sol, k);
    HarnackField hf;
    hf.t = sol.times[k];
    hf.v = L.v;
    hf.v_over_u.assign(L.v.size(), kNaN);
    hf.max_v = -std::numeric_limits<double>::infinity();
    hf.min_v_over_u = std::numeric_limits<double>::infinity();
    hf.max_v_over_u = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < L.v.size(); ++i) {
      if (!L.mask[i]) continue;
      hf.v_over_u[i] = L.v[i] / sol.u[k][i];
      hf.max_v = std::max(hf.max_v, L.v[i]);
      hf.min_v_over_u = std::min(hf.min_v_over_u, hf.v_over_u[i]);
      hf.max_v_over_u = std::max(hf.max_v_over_u, hf.v_over_u[i]);
    }
    out.push_back(std::move(hf));
  }
  return out;
}

HarnackResidual harnack_residual(const FlowHistory& h, const ConjugateSolution& sol) {
  const std::size_t K = sol.times.size();
  if (K < 3) throw ParameterError("need at least three output times");
  std::vector<HarnackLevel> levels;
  levels.reserve(K);
  for (std::size_t k = 0; k < K; ++k) levels.push_back(harnack_level(h, sol, k));
  HarnackResidual res;
  for (std::size_t k = 1; k + 1 < K; ++k) {
    const auto& L = levels[k];
    const double t0 = sol.times[k - 1], t1 = sol.times[k], t2 = sol.times[k + 1];
    // Three-point derivative on a nonuniform stencil.
    const double a = -(t2 - t1) / ((t1 - t0) * (t2 - t0));
    const double c = (t1 - t0) / ((t2 - t1) * (t2 - t0));
    const double b = -a - c;
    const auto dv = differentiate(L.geo, L.v);
    const auto mask = support_mask(sol.u[k], L.g.topology, 6);
    const double tau = sol.tau_eff(k);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < L.v.size(); ++i) {
      if (!mask[i] || !levels[k - 1].mask[i] || !levels[k + 1].mask[i]) continue;
      const double v_t = a * levels[k - 1].v[i] + b * L.v[i] + c * levels[k + 1].v[i];
      const double box = -v_t - dv.laplacian[i] + L.geo.curvature.R[i] * L.v[i];
      const double e_rad = L.geo.curvature.Ric_rad[i] + L.df.dss[i] - 0.5 / tau;
      const double e_sph = L.geo.curvature.Ric_sph[i] + L.df.hess_sph[i] - 0.5 / tau;
      const double rhs = -2.0 * tau * (e_rad * e_rad + (L.g.n - 1) * e_sph * e_sph) * sol.u[k][i];
      const double w = L.geo.cell_volume[i];
      num += w * (box - rhs) * (box - rhs);
      den += w * rhs * rhs;
    }
    const double rel = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
    res.times.push_back(t1);
    res.relative.push_back(rel);
    res.max_relative = std::max(res.max_relative, rel);
  }
  return res;
}

CurveReport curve_harnack_check(const FlowHistory& h, const ConjugateSolution& sol,
                                const AxisPath& path, double tol) {
  CurveReport rep;
  rep.min_slack = std::numeric_limits<double>::infinity();
  const std::size_t K = sol.times.size();
  if (K < 3) throw ParameterError("need at least three output times");
  struct Point {
    double x, f, R, phi, tau;
    bool supported;
  };
  std::vector<Point> pts;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const WarpedMetric g = h.at(sol.times[k]);
    const Geometry geo = analyze(g);
    const auto f = capped_potential(sol, k, g.n);
    const double x = path(sol.times[k]);
    const auto mask = support_mask(sol.u[k], g.topology, 3);
    const double hx = g.spacing();
    const auto node = static_cast<std::size_t>(std::clamp(std::lround(x / hx), 0L, static_cast<long>(g.size()) - 1));
    const Parity even = Parity::even;
    pts.push_back({x, interpolate(f, x, even, g.topology, hx),
                   interpolate(geo.curvature.R, x, even, g.topology, hx),
                   interpolate(g.phi, x, even, g.topology, hx), sol.tau_eff(k), mask[node] != 0});
  }
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const Point& p = pts[k];
    const Point& q = pts[k + 1];
    if (!p.supported || !q.supported) continue;
    const double dt = sol.times[k + 1] - sol.times[k];
    const double speed = 0.5 * (p.phi + q.phi) * (q.x - p.x) / dt;
    const double lhs = -(q.f - p.f) / dt;
    const double rhs_p = 0.5 * (p.R + speed * speed) - p.f / (2.0 * p.tau);
    const double rhs_q = 0.5 * (q.R + speed * speed) - q.f / (2.0 * q.tau);
    CurveSample s{0.5 * (sol.times[k] + sol.times[k + 1]), lhs, 0.5 * (rhs_p + rhs_q), 0.0};
    s.slack = s.rhs - s.lhs;
    rep.min_slack = std::min(rep.min_slack, s.slack);
    rep.samples.push_back(s);
    if (s.slack < -tol) rep.violations.push_back(s);
  }
  return rep;
}

FvsLReport f_vs_l_check(const FlowHistory& h, const ConjugateSolution& sol,
                        const ReducedDistanceAt& l_at, const std::vector<double>& times, double tol) {
  FvsLReport rep;
  rep.max_excess = -std::numeric_limits<double>::infinity();
  for (double t : times) {
    auto it = std::find_if(sol.times.begin(), sol.times.end(),
                           [&](double s) { return std::abs(s - t) <= 1e-12 * std::max(1.0, std::abs(t)); });
    if (it == sol.times.end()) throw ParameterError("comparison time is not an output time of the solve");
    const auto k = static_cast<std::size_t>(it - sol.times.begin());
    const auto f = kernel_potential(sol, k, h.n());
    const auto l = l_at(sol.times[k]);
    if (l.size() != f.size()) throw ParameterError("reduced distance does not match the grid");
    const auto mask = support_mask(sol.u[k], h.topology(), 0);
    FvsLSample s{sol.times[k], -std::numeric_limits<double>::infinity(), 0};
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (!mask[i] || !std::isfinite(l[i])) continue;
      if (f[i] - l[i] > s.max_excess) {
        s.max_excess = f[i] - l[i];
        s.worst_node = i;
      }
    }
    rep.samples.push_back(s);
    rep.max_excess = std::max(rep.max_excess, s.max_excess);
    if (s.max_excess > tol) rep.violations.push_back(s);
  }
  return rep;
}

}  // namespace riccilab
