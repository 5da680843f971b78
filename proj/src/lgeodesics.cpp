#include "riccilab/lgeodesics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "riccilab/errors.hpp"
#include "riccilab/parallel.hpp"

namespace riccilab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum Field {
  kPhi, kPhiX, kPhiXX, kPhiT, kPhiTX, kPsi, kPsiX, kPsiT, kR, kRX, kRXX, kRT, kRicRad, kFieldCount
};

constexpr std::array<Parity, kFieldCount> kParity = {
    Parity::even, Parity::odd, Parity::even, Parity::even, Parity::odd, Parity::odd, Parity::even,
    Parity::odd,  Parity::even, Parity::odd, Parity::even, Parity::even, Parity::even};

struct Level {
  std::array<std::vector<double>, kFieldCount> f;
};

// R_t comes from differencing R between the bracketing snapshots rather than
// from Delta R + 2 |Ric|^2: the flowed R carries grid-scale noise near the
// poles that the Laplacian amplifies, and K must stay consistent with the R
// the path actually sees.
std::vector<double> scalar_rate(const FlowHistory& h, double t) {
  const auto& ts = h.times();
  if (ts.size() < 2) return std::vector<double>(h.snapshot(0).size(), 0.0);
  std::size_t k = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin());
  k = std::clamp<std::size_t>(k, 1, ts.size() - 1);
  const auto r0 = curvature(h.snapshot(k - 1)).R;
  const auto r1 = curvature(h.snapshot(k)).R;
  std::vector<double> out(r0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (r1[i] - r0[i]) / (ts[k] - ts[k - 1]);
  return out;
}

Level make_level(const WarpedMetric& g, std::vector<double> R_t) {
  const Geometry geo = analyze(g, false);
  const std::size_t m = g.size();
  const double h = geo.h;
  const auto& c = geo.curvature;
  Level lv;
  lv.f[kPhi] = g.phi;
  lv.f[kPhiX] = geo.phi_x;
  lv.f[kPhiXX] = derivative(g.phi, 2, Parity::even, g.topology, h);
  lv.f[kPhiT].resize(m);
  lv.f[kPsiT].resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    lv.f[kPhiT][i] = -c.Ric_rad[i] * g.phi[i];
    lv.f[kPsiT][i] = -c.Ric_sph[i] * g.psi[i];
  }
  lv.f[kPhiTX] = derivative(lv.f[kPhiT], 1, Parity::even, g.topology, h);
  lv.f[kPsi] = g.psi;
  lv.f[kPsiX] = geo.psi_x;
  lv.f[kR] = c.R;
  lv.f[kRX] = derivative(c.R, 1, Parity::even, g.topology, h);
  lv.f[kRXX] = derivative(c.R, 2, Parity::even, g.topology, h);
  lv.f[kRT] = std::move(R_t);
  lv.f[kRicRad] = c.Ric_rad;
  return lv;
}

using Values = std::array<double, kFieldCount>;

// Shared 4-point Lagrange stencil for all fields at one x. Ball grids extend
// the cubic two cells past the open end.
class Probe {
 public:
  Probe(Topology topology, std::size_t m) : topology_(topology), m_(static_cast<long>(m)) {
    h_ = topology == Topology::periodic ? 1.0 / static_cast<double>(m) : 1.0 / (static_cast<double>(m) - 1.0);
  }

  double h() const { return h_; }

  Values eval(const Level& lv, double x) const {
    const double u = x / h_;
    long j = static_cast<long>(std::floor(u));
    if (topology_ == Topology::ball) j = std::min(j, m_ - 3);
    const double t = u - static_cast<double>(j);
    const std::array<double, 4> w = {-t * (t - 1.0) * (t - 2.0) / 6.0,
                                     (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
                                     -(t + 1.0) * t * (t - 2.0) / 2.0,
                                     (t + 1.0) * t * (t - 1.0) / 6.0};
    std::array<long, 4> idx;
    std::array<bool, 4> flip;
    for (int k = 0; k < 4; ++k) map(j - 1 + k, idx[k], flip[k]);
    Values out{};
    for (int f = 0; f < kFieldCount; ++f) {
      const auto& v = lv.f[f];
      const bool odd = kParity[f] == Parity::odd;
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += w[k] * ((odd && flip[k]) ? -v[idx[k]] : v[idx[k]]);
      out[f] = acc;
    }
    return out;
  }

 private:
  void map(long k, long& idx, bool& flip) const {
    flip = false;
    if (topology_ == Topology::sphere) {
      const long period = 2 * (m_ - 1);
      long j = k % period;
      if (j < 0) j += period;
      if (j <= m_ - 1) {
        idx = j;
      } else {
        idx = period - j;
        flip = true;
      }
      return;
    }
    if (topology_ == Topology::periodic) {
      idx = ((k % m_) + m_) % m_;
      return;
    }
    if (k < 0) {
      idx = -k;
      flip = true;
    } else {
      idx = std::min(k, m_ - 1);
    }
  }

  Topology topology_;
  long m_;
  double h_ = 0.0;
};

// Field tables at every RK4 stage time of a common sigma grid; shared by all
// shots of a fan.
struct Context {
  int n = 3;
  Topology topology = Topology::sphere;
  double t0 = 0.0;
  std::vector<double> sigma;     // step boundaries, sigma[0] = 0
  std::vector<Level> levels;     // 2 k: sigma[k], 2 k + 1: midpoint
  std::vector<int> record_step;  // requested tau -> step index (or -1)
  Probe probe{Topology::sphere, 4};
  double x_end = 1.0;     // validity limit of a landing point
  double phi0 = 1.0;      // phi at the pole at t0
  double length0 = 1.0;   // pole to far end (arclength) at t0
};

Context make_context(const FlowHistory& h, double t0, const std::vector<double>& taus, int ode_steps,
                     int jobs) {
  if (h.empty()) throw ParameterError("empty history");
  if (h.topology() == Topology::periodic) {
    throw ParameterError("L-geodesics start at a pole; periodic topology has none");
  }
  if (taus.empty()) throw ParameterError("no tau values requested");
  const double tau_max = *std::max_element(taus.begin(), taus.end());
  if (!(*std::min_element(taus.begin(), taus.end()) > 0.0)) throw ParameterError("tau values must be positive");
  if (!(t0 <= h.t_last() && t0 - tau_max >= h.t_first() - 1e-14)) {
    throw RangeError("L-geodesic window outside the history");
  }
  if (h.has_regrid_in(t0 - tau_max, t0)) {
    throw ParameterError("L-geodesic window contains a regrid event");
  }
  if (ode_steps < 4) throw ParameterError("ode_steps must be at least 4");

  Context ctx;
  ctx.n = h.n();
  ctx.topology = h.topology();
  ctx.t0 = t0;
  std::vector<double> breaks;
  for (double tau : taus) breaks.push_back(2.0 * std::sqrt(tau));
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  const double sigma_max = breaks.back();
  const double target = sigma_max / ode_steps;
  ctx.sigma.push_back(0.0);
  for (double b : breaks) {
    const double a = ctx.sigma.back();
    const int k = std::max(1, static_cast<int>(std::ceil((b - a) / target - 1e-9)));
    for (int i = 1; i <= k; ++i) ctx.sigma.push_back(i == k ? b : a + (b - a) * i / k);
  }
  const std::size_t steps = ctx.sigma.size() - 1;
  for (double tau : taus) {
    const double s = 2.0 * std::sqrt(tau);
    auto it = std::lower_bound(ctx.sigma.begin(), ctx.sigma.end(), s - 1e-14);
    ctx.record_step.push_back(static_cast<int>(it - ctx.sigma.begin()));
  }
  ctx.levels.resize(2 * steps + 1);
  const double t_lo = h.t_first();
  parallel_for(ctx.levels.size(), jobs, [&](std::size_t k) {
    const double s = (k % 2 == 0) ? ctx.sigma[k / 2] : 0.5 * (ctx.sigma[k / 2] + ctx.sigma[k / 2 + 1]);
    const double t = std::max(t_lo, t0 - 0.25 * s * s);
    ctx.levels[k] = make_level(h.at(t), scalar_rate(h, t));
  });
  const WarpedMetric g0 = h.at(t0);
  ctx.probe = Probe(ctx.topology, g0.size());
  ctx.phi0 = g0.phi[0];
  ctx.length0 = arclength(g0).back();
  ctx.x_end = ctx.topology == Topology::ball ? 1.0 + 2.0 * ctx.probe.h() : 1.0;
  return ctx;
}

// x, y = dx/dsigma, L, K, x_v, y_v
using State = std::array<double, 6>;

State rhs(const Context& ctx, const Level& lv, double sigma, const State& s) {
  const Values c = ctx.probe.eval(lv, s[0]);
  const double phi = c[kPhi];
  const double y = s[1];
  const double phi_sig = -0.5 * sigma * c[kPhiT];
  const double phi_sig_x = -0.5 * sigma * c[kPhiTX];
  const double s2 = sigma * sigma;
  const double A = s2 * c[kRX] / (8.0 * phi * phi);
  const double B = c[kPhiX] / phi;
  const double C = phi_sig / phi;
  const double A_x = s2 * (c[kRXX] / (8.0 * phi * phi) - c[kRX] * c[kPhiX] / (4.0 * phi * phi * phi));
  const double B_x = c[kPhiXX] / phi - B * B;
  const double C_x = phi_sig_x / phi - phi_sig * c[kPhiX] / (phi * phi);
  const double w = phi * y;
  State d;
  d[0] = y;
  d[1] = A - B * y * y - 2.0 * C * y;
  d[2] = w * w + 0.25 * s2 * c[kR];
  d[3] = s2 * s2 * c[kRT] / 16.0 - 0.25 * s2 * c[kR] - 0.25 * s2 * sigma * c[kRX] * w / phi +
         0.5 * s2 * c[kRicRad] * w * w;
  d[4] = s[5];
  d[5] = (A_x - B_x * y * y - 2.0 * C_x * y) * s[4] + (-2.0 * B * y - 2.0 * C) * s[5];
  return d;
}

LSample make_sample(const Context& ctx, const Level& lv, double sigma, const State& s, double v0) {
  const Values c = ctx.probe.eval(lv, s[0]);
  const int n = ctx.n;
  LSample out;
  out.tau = 0.25 * sigma * sigma;
  out.x = s[0];
  out.phi = c[kPhi];
  const double w = c[kPhi] * s[1];
  out.X = 2.0 * w / sigma;
  out.R = c[kR];
  out.L = s[2];
  out.K = s[3];
  const double R_s = c[kRX] / c[kPhi];
  out.H = c[kRT] - c[kR] / out.tau - 2.0 * R_s * out.X + 2.0 * c[kRicRad] * out.X * out.X;
  out.x_v = s[4];
  const double phi_sig = -0.5 * sigma * c[kPhiT];
  const double psi_sig = -0.5 * sigma * c[kPsiT];
  // d/dsigma log J = d log phi + d log x_v + (n - 1) d log (psi / v0)
  double dlog = (c[kPhiX] * s[1] + phi_sig) / c[kPhi] + s[5] / s[4];
  if (v0 == 0.0) {
    out.psi_over_v = c[kPhi] * s[4];
    dlog += (n - 1) * (phi_sig / c[kPhi] + s[5] / s[4]);
  } else {
    out.psi_over_v = c[kPsi] / std::abs(v0);
    dlog += (n - 1) * (c[kPsiX] * s[1] + psi_sig) / c[kPsi];
  }
  out.log_jacobian = std::log(c[kPhi]) + std::log(std::abs(s[4])) + (n - 1) * std::log(std::abs(out.psi_over_v));
  out.dlogJ_dtau = 2.0 / sigma * dlog;
  return out;
}

// Integrates one shot. With `all` every step is sampled, otherwise only the
// requested steps (in order of ctx.record_step). Stops when the path leaves
// the valid region.
LPath integrate_path(const Context& ctx, double v0, bool all) {
  LPath p;
  p.v0 = v0;
  p.t0 = ctx.t0;
  State s = {0.0, std::abs(v0) / ctx.phi0, 0.0, 0.0, 0.0, 1.0 / ctx.phi0};
  std::vector<int> order;
  if (!all) {
    order.resize(ctx.record_step.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return ctx.record_step[a] < ctx.record_step[b]; });
    p.samples.resize(ctx.record_step.size());
    for (auto& smp : p.samples) smp.tau = std::numeric_limits<double>::quiet_NaN();
  }
  std::size_t next = 0;
  const std::size_t steps = ctx.sigma.size() - 1;
  auto outside = [&](double x) { return !(x <= ctx.x_end) || !std::isfinite(x); };
  for (std::size_t k = 0; k < steps; ++k) {
    const double a = ctx.sigma[k];
    const double hs = ctx.sigma[k + 1] - a;
    const Level& l0 = ctx.levels[2 * k];
    const Level& lm = ctx.levels[2 * k + 1];
    const Level& l1 = ctx.levels[2 * k + 2];
    State k1 = rhs(ctx, l0, a, s);
    State tmp;
    for (int i = 0; i < 6; ++i) tmp[i] = s[i] + 0.5 * hs * k1[i];
    if (outside(tmp[0])) { p.truncated = true; break; }
    State k2 = rhs(ctx, lm, a + 0.5 * hs, tmp);
    for (int i = 0; i < 6; ++i) tmp[i] = s[i] + 0.5 * hs * k2[i];
    if (outside(tmp[0])) { p.truncated = true; break; }
    State k3 = rhs(ctx, lm, a + 0.5 * hs, tmp);
    for (int i = 0; i < 6; ++i) tmp[i] = s[i] + hs * k3[i];
    if (outside(tmp[0])) { p.truncated = true; break; }
    State k4 = rhs(ctx, l1, a + hs, tmp);
    for (int i = 0; i < 6; ++i) s[i] += hs / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (outside(s[0])) { p.truncated = true; break; }
    const double sig = ctx.sigma[k + 1];
    if (all) {
      p.samples.push_back(make_sample(ctx, l1, sig, s, v0));
    } else {
      while (next < order.size() && ctx.record_step[order[next]] == static_cast<int>(k + 1)) {
        p.samples[order[next]] = make_sample(ctx, l1, sig, s, v0);
        ++next;
      }
    }
  }
  return p;
}

bool has_sample(const LPath& p, std::size_t k) { return k < p.samples.size() && !std::isnan(p.samples[k].tau); }

double valid_landing(const Context& ctx, const LPath& p, std::size_t k) {
  if (!has_sample(p, k)) return kInf;
  const double x = p.samples[k].x;
  if (ctx.topology == Topology::sphere && x >= 1.0) return kInf;
  return x;
}

struct Segment {
  double xa, xb, La, Lb, da, db, Ka, Kb;
  int run;
};

void build_field(const Context& ctx, const FlowHistory& h, const std::vector<LPath>& fan, std::size_t k,
                 double tau, ReducedField& rf) {
  rf.tau_bar = tau;
  rf.g = h.at(std::max(h.t_first(), ctx.t0 - tau));
  const WarpedMetric& g = rf.g;
  const std::size_t m = g.size();
  const double sq = std::sqrt(tau);

  // Segments between consecutive valid members; runs break at folds and gaps.
  std::vector<Segment> segs;
  int run = 0;
  int last_dir = 0;
  for (std::size_t j = 0; j + 1 < fan.size(); ++j) {
    const double xa = valid_landing(ctx, fan[j], k);
    const double xb = valid_landing(ctx, fan[j + 1], k);
    if (!std::isfinite(xa) || !std::isfinite(xb)) {
      ++run;
      last_dir = 0;
      continue;
    }
    const LSample& a = fan[j].samples[k];
    const LSample& b = fan[j + 1].samples[k];
    const int dir = xb > xa ? 1 : (xb < xa ? -1 : 0);
    if (last_dir != 0 && dir != 0 && dir != last_dir) ++run;
    if (dir != 0) last_dir = dir;
    // dL/dx = 2 phi w = phi X sigma
    const double sigma = 2.0 * sq;
    segs.push_back({xa, xb, a.L, b.L, a.phi * a.X * sigma, b.phi * b.X * sigma, a.K, b.K,
                    run});
  }

  rf.L.assign(m, kInf);
  rf.K.assign(m, 0.0);
  rf.covered.assign(m, 0);
  rf.kink.assign(m, 0);
  std::vector<int> best_run(m, -1);
  for (std::size_t i = 0; i < m; ++i) {
    const double xq = g.x[i];
    for (const Segment& sg : segs) {
      const double lo = std::min(sg.xa, sg.xb), hi = std::max(sg.xa, sg.xb);
      if (xq < lo - 1e-13 || xq > hi + 1e-13) continue;
      const double dx = sg.xb - sg.xa;
      double L, K;
      if (std::abs(dx) < 1e-15) {
        L = std::min(sg.La, sg.Lb);
        K = sg.La <= sg.Lb ? sg.Ka : sg.Kb;
      } else {
        const double t = (xq - sg.xa) / dx;
        const double t2 = t * t, t3 = t2 * t;
        L = (2 * t3 - 3 * t2 + 1) * sg.La + (t3 - 2 * t2 + t) * dx * sg.da + (-2 * t3 + 3 * t2) * sg.Lb +
            (t3 - t2) * dx * sg.db;
        K = (1 - t) * sg.Ka + t * sg.Kb;
      }
      if (best_run[i] >= 0 && sg.run != best_run[i] && std::abs(L - rf.L[i]) > 1e-9 * (1.0 + std::abs(L))) {
        rf.kink[i] = 1;
      }
      if (L < rf.L[i]) {
        rf.L[i] = L;
        rf.K[i] = K;
        best_run[i] = sg.run;
      }
      rf.covered[i] = 1;
    }
  }

  const Geometry geo = analyze(g);
  double vol = 0.0, vol_cov = 0.0;
  rf.l.assign(m, kInf);
  rf.Lbar.assign(m, kInf);
  rf.min_l = kInf;
  for (std::size_t i = 0; i < m; ++i) {
    vol += geo.quad_weight[i];
    if (!rf.covered[i]) continue;
    vol_cov += geo.quad_weight[i];
    rf.l[i] = rf.L[i] / (2.0 * sq);
    rf.Lbar[i] = 2.0 * sq * rf.L[i];
    rf.min_l = std::min(rf.min_l, rf.l[i]);
  }
  // A pole node has zero trapezoid weight; count it as covered volume only via its neighbours.
  rf.coverage = vol > 0.0 ? vol_cov / vol : 0.0;
}

// Transport form: omega int tau^{-n/2} e^{-l} phi x_v psi^{n-1} dv over the
// contiguous fan from v = 0 up to the cut.
double transport_volume(const Context& ctx, const std::vector<LPath>& fan, std::size_t k, double tau) {
  const int n = ctx.n;
  const double omega = unit_sphere_volume(n - 1);
  double acc = 0.0;
  double v_prev = 0.0, f_prev = 0.0, x_prev = 0.0;
  const double x_cut = 1.0;
  for (std::size_t j = 0; j < fan.size(); ++j) {
    const LPath& p = fan[j];
    const double x = has_sample(p, k) ? p.samples[k].x : kInf;
    if (!std::isfinite(x) || x > x_cut || (j > 0 && p.samples[k].x_v <= 0.0)) {
      // Partial interval up to the cut when the landing crosses it (ball edge).
      if (std::isfinite(x) && x > x_cut && j > 0 && x > x_prev) {
        const LSample& s = p.samples[k];
        const double f = std::pow(tau, -0.5 * n) * std::exp(-s.L / (2.0 * std::sqrt(tau))) * s.phi * s.x_v *
                         std::pow(s.psi_over_v * std::abs(p.v0), n - 1);
        const double frac = (x_cut - x_prev) / (x - x_prev);
        const double v_cut = v_prev + frac * (std::abs(p.v0) - v_prev);
        const double f_cut = f_prev + frac * (f - f_prev);
        acc += 0.5 * (v_cut - v_prev) * (f_cut + f_prev);
      }
      break;
    }
    const LSample& s = p.samples[k];
    const double v = std::abs(p.v0);
    const double f = v == 0.0 ? 0.0
                              : std::pow(tau, -0.5 * n) * std::exp(-s.L / (2.0 * std::sqrt(tau))) * s.phi *
                                    s.x_v * std::pow(s.psi_over_v * v, n - 1);
    if (j > 0) acc += 0.5 * (v - v_prev) * (f + f_prev);
    v_prev = v;
    f_prev = f;
    x_prev = x;
  }
  return omega * acc;
}

// Bisection in log v between the last landing inside the domain and the first
// one beyond it, so that the far end of the grid is reached.
void refine_edge(const Context& ctx, std::vector<LPath>& fan, std::size_t k) {
  const double h = ctx.probe.h();
  const double lo_ok = ctx.topology == Topology::ball ? 1.0 : 1.0 - 0.5 * h;
  for (int iter = 0; iter < 60; ++iter) {
    std::size_t last = fan.size();
    double best = -kInf;
    for (std::size_t j = 0; j < fan.size(); ++j) {
      const double x = valid_landing(ctx, fan[j], k);
      if (std::isfinite(x) && x > best) {
        best = x;
        last = j;
      }
    }
    if (last == fan.size() || best >= lo_ok) return;
    if (last + 1 >= fan.size()) {
      // Even the fastest shot stays inside: widen the fan.
      fan.push_back(integrate_path(ctx, 2.0 * std::abs(fan.back().v0), false));
      continue;
    }
    const double va = std::abs(fan[last].v0), vb = std::abs(fan[last + 1].v0);
    if (vb / va < 1.0 + 1e-12) return;
    const double v = std::sqrt(va * vb);
    fan.insert(fan.begin() + static_cast<long>(last) + 1, integrate_path(ctx, v, false));
  }
}

double tau_min_of(const std::vector<double>& taus) { return *std::min_element(taus.begin(), taus.end()); }

std::vector<double> fan_speeds(const Context& ctx, const std::vector<double>& taus, const LOptions& opts) {
  if (opts.fan_size < 2) throw ParameterError("fan_size must be at least 2");
  if (!(opts.v_ratio > 1.0)) throw ParameterError("v_ratio must exceed 1");
  const double vmax =
      opts.v_max > 0.0 ? opts.v_max : 1.5 * ctx.length0 / (2.0 * std::sqrt(tau_min_of(taus)));
  const double vmin = vmax / opts.v_ratio;
  std::vector<double> v{0.0};
  for (int i = 0; i < opts.fan_size; ++i) {
    v.push_back(vmin * std::pow(opts.v_ratio, static_cast<double>(i) / (opts.fan_size - 1)));
  }
  return v;
}

}  // namespace

std::vector<double> geometric_ladder(double lo, double hi, int count) {
  if (!(lo > 0.0 && hi >= lo) || count < 1) throw ParameterError("invalid ladder");
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) {
    out[i] = count == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
  }
  return out;
}

LPath shoot(const FlowHistory& h, double t0, double v0, double tau_max, const LOptions& opts) {
  const Context ctx = make_context(h, t0, {tau_max}, opts.ode_steps, opts.jobs);
  return integrate_path(ctx, v0, true);
}

LFan shoot_fan(const FlowHistory& h, double t0, std::vector<double> taus, const LOptions& opts) {
  const Context ctx = make_context(h, t0, taus, opts.ode_steps, opts.jobs);
  const std::vector<double> v = fan_speeds(ctx, taus, opts);
  std::vector<LPath> fan(v.size());
  parallel_for(v.size(), opts.jobs, [&](std::size_t j) { fan[j] = integrate_path(ctx, v[j], false); });
  for (std::size_t k = 0; k < taus.size(); ++k) refine_edge(ctx, fan, k);

  LFan out;
  out.t0 = t0;
  out.taus = taus;
  out.fields.resize(taus.size());
  out.vtilde_transport.resize(taus.size());
  parallel_for(taus.size(), opts.jobs, [&](std::size_t k) {
    build_field(ctx, h, fan, k, taus[k], out.fields[k]);
    out.vtilde_transport[k] = transport_volume(ctx, fan, k, taus[k]);
  });
  out.paths = std::move(fan);
  return out;
}

ReducedField reduced_distance_field(const FlowHistory& h, double t0, double tau_bar, const LOptions& opts) {
  LFan fan = shoot_fan(h, t0, {tau_bar}, opts);
  return std::move(fan.fields.front());
}

ReducedVolume reduced_volume(const ReducedField& field, const WarpedMetric& g_at_tau,
                             double coverage_threshold) {
  if (g_at_tau.size() != field.l.size()) throw ParameterError("field size does not match the metric grid");
  const Geometry geo = analyze(g_at_tau);
  const int n = g_at_tau.n;
  ReducedVolume out;
  for (std::size_t i = 0; i < field.l.size(); ++i) {
    if (!field.covered[i]) continue;
    out.value += geo.quad_weight[i] * std::pow(field.tau_bar, -0.5 * n) * std::exp(-field.l[i]);
  }
  out.coverage = field.coverage;
  out.flagged = field.coverage < coverage_threshold;
  return out;
}

JacobianReport jacobian_transport(const LPath& path, int n, double tol) {
  JacobianReport r;
  r.min_slack = kInf;
  double prev = kInf;
  for (const LSample& s : path.samples) {
    if (!(s.tau > 0.0) || !(s.x_v > 0.0)) continue;
    JacobianSample js;
    js.tau = s.tau;
    js.dlogJ_dtau = s.dlogJ_dtau;
    js.bound = 0.5 * n / s.tau - 0.5 * std::pow(s.tau, -1.5) * s.K;
    js.slack = js.bound - js.dlogJ_dtau;
    const double l = s.L / (2.0 * std::sqrt(s.tau));
    js.monotone_quantity = -0.5 * n * std::log(s.tau) - l + s.log_jacobian;
    const double scale = std::abs(0.5 * n / s.tau) + std::abs(js.dlogJ_dtau);
    if (js.slack < -tol * scale) r.violations.push_back(js);
    r.min_slack = std::min(r.min_slack, js.slack / scale);
    if (std::isfinite(prev)) r.max_increase = std::max(r.max_increase, js.monotone_quantity - prev);
    prev = js.monotone_quantity;
    r.samples.push_back(js);
  }
  if (!std::isfinite(r.min_slack)) r.min_slack = 0.0;
  return r;
}

std::vector<double> energy_identity_errors(const LPath& path) {
  std::vector<double> out;
  for (const LSample& s : path.samples) {
    if (!(s.tau > 0.0)) continue;
    const double lhs = std::pow(s.tau, 1.5) * (s.R + s.X * s.X);
    const double rhs = -s.K + 0.5 * s.L;
    out.push_back(std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-300}));
  }
  return out;
}

IdentityReport identity_suite(const FlowHistory& h, double t0, const std::vector<double>& taus,
                              double ladder_ratio, const LOptions& opts) {
  if (!(ladder_ratio > 1.0)) throw ParameterError("ladder_ratio must exceed 1");
  std::vector<double> all;
  for (double tau : taus) {
    all.push_back(tau / ladder_ratio);
    all.push_back(tau);
    all.push_back(tau * ladder_ratio);
  }
  const LFan fan = shoot_fan(h, t0, all, opts);
  const int n = h.n();
  IdentityReport rep;
  rep.min_slack = kInf;
  rep.min_weak = kInf;
  for (std::size_t c = 0; c < taus.size(); ++c) {
    const ReducedField& lo = fan.fields[3 * c];
    const ReducedField& f = fan.fields[3 * c + 1];
    const ReducedField& hi = fan.fields[3 * c + 2];
    const double tau = f.tau_bar;
    const double sq = std::sqrt(tau);
    const double dt = hi.tau_bar - lo.tau_bar;
    const std::size_t m = f.g.size();
    const Geometry geo = analyze(f.g);
    const auto& R = geo.curvature.R;

    // Excluded: uncovered or kink nodes (at any ladder level) and their stencil reach.
    std::vector<char> bad(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
      const bool b = !lo.covered[i] || !f.covered[i] || !hi.covered[i] || lo.kink[i] || f.kink[i] || hi.kink[i];
      if (!b) continue;
      for (long d = -3; d <= 3; ++d) {
        long j = static_cast<long>(i) + d;
        if (j >= 0 && j < static_cast<long>(m)) bad[j] = 1;
      }
    }
    // Derivatives of the envelope need finite values everywhere; fill excluded nodes smoothly.
    std::vector<double> L = f.L, l = f.l;
    for (std::size_t i = 0; i < m; ++i) {
      if (!std::isfinite(L[i])) L[i] = 0.0;
      l[i] = L[i] / (2.0 * sq);
    }
    const ScalarDerivatives dL = differentiate(geo, L);
    const ScalarDerivatives dl = differentiate(geo, l);

    IdentityLevel lv;
    lv.tau_bar = tau;
    lv.min_l = f.min_l;
    lv.min_Lbar_minus_2n_tau = kInf;
    double num_lt = 0, den_lt = 0, num_gl = 0, den_gl = 0;
    double s_lap = kInf, s_heat = kInf, s_ell = kInf, s_bar = kInf;
    double sc_lap = 0, sc_heat = 0, sc_ell = 0, sc_bar = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (f.covered[i]) lv.min_Lbar_minus_2n_tau = std::min(lv.min_Lbar_minus_2n_tau, f.Lbar[i] - 2.0 * n * tau);
      if (bad[i]) {
        ++lv.excluded;
        continue;
      }
      ++lv.checked;
      const double K = f.K[i];
      const double L_tau = (hi.L[i] - lo.L[i]) / dt;
      const double rhs_lt = 2.0 * sq * R[i] - L[i] / (2.0 * tau) + K / tau;
      num_lt = std::max(num_lt, std::abs(L_tau - rhs_lt));
      den_lt = std::max(den_lt, std::abs(L_tau) + std::abs(2.0 * sq * R[i]) + std::abs(L[i] / (2.0 * tau)) +
                                  std::abs(K / tau));
      const double g2 = dL.ds[i] * dL.ds[i];
      const double rhs_gl = -4.0 * tau * R[i] + 2.0 * L[i] / sq - 4.0 * K / sq;
      num_gl = std::max(num_gl, std::abs(g2 - rhs_gl));
      den_gl = std::max(den_gl, g2 + std::abs(4.0 * tau * R[i]) + std::abs(2.0 * L[i] / sq) + std::abs(4.0 * K / sq));
      // Delta L <= -2 sqrt(tau) R + n / sqrt(tau) - K / tau
      const double bound_lap = -2.0 * sq * R[i] + n / sq - K / tau;
      s_lap = std::min(s_lap, bound_lap - dL.laplacian[i]);
      sc_lap = std::max(sc_lap, std::abs(bound_lap) + std::abs(dL.laplacian[i]));
      const double l_tau = (hi.l[i] - lo.l[i]) / dt;
      const double gl2 = dl.ds[i] * dl.ds[i];
      const double e_heat = l_tau - dl.laplacian[i] + gl2 - R[i] + 0.5 * n / tau;
      s_heat = std::min(s_heat, e_heat);
      sc_heat = std::max(sc_heat, std::abs(l_tau) + std::abs(dl.laplacian[i]) + gl2 + std::abs(R[i]) + 0.5 * n / tau);
      const double e_ell = 2.0 * dl.laplacian[i] - gl2 + R[i] + (l[i] - n) / tau;
      s_ell = std::min(s_ell, -e_ell);
      sc_ell = std::max(sc_ell, 2.0 * std::abs(dl.laplacian[i]) + gl2 + std::abs(R[i]) + std::abs(l[i] - n) / tau);
      const double Lbar_tau = (2.0 * std::sqrt(hi.tau_bar) * hi.L[i] - 2.0 * std::sqrt(lo.tau_bar) * lo.L[i]) / dt;
      const double lap_Lbar = 2.0 * sq * dL.laplacian[i];
      s_bar = std::min(s_bar, 2.0 * n - Lbar_tau - lap_Lbar);
      sc_bar = std::max(sc_bar, std::abs(Lbar_tau) + std::abs(lap_Lbar) + 2.0 * n);
    }
    auto norm = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
    lv.res_Ltau = norm(num_lt, den_lt);
    lv.res_gradL = norm(num_gl, den_gl);
    lv.slack_lapL = std::isfinite(s_lap) ? norm(s_lap, sc_lap) : 0.0;
    lv.slack_l_heat = std::isfinite(s_heat) ? norm(s_heat, sc_heat) : 0.0;
    lv.slack_l_elliptic = std::isfinite(s_ell) ? norm(s_ell, sc_ell) : 0.0;
    lv.slack_Lbar = std::isfinite(s_bar) ? norm(s_bar, sc_bar) : 0.0;

    // Weak forms against Gaussian bumps in arclength; grad l from the grid
    // derivative, the Laplacian moved onto the bump.
    const std::vector<double> s_of_x = arclength(f.g);
    const double s_len = s_of_x.back();
    lv.weak_l_heat = kInf;
    lv.weak_l_elliptic = kInf;
    for (int b = 1; b <= 5; ++b) {
      const double sc = s_len * b / 6.0;
      const double wdt = 0.08 * s_len;
      double i_heat = 0, i_ell = 0, sc_wh = 0, sc_we = 0;
      bool ok = true;
      for (std::size_t i = 0; i < m; ++i) {
        const double eta = std::exp(-0.5 * (s_of_x[i] - sc) * (s_of_x[i] - sc) / (wdt * wdt));
        if (eta < 1e-12) continue;
        if (!lo.covered[i] || !f.covered[i] || !hi.covered[i]) {
          ok = false;
          break;
        }
        const double deta = -eta * (s_of_x[i] - sc) / (wdt * wdt);
        const double wq = geo.quad_weight[i];
        const double l_tau = (hi.l[i] - lo.l[i]) / dt;
        const double gl = dl.ds[i];
        const double a = eta * (l_tau + gl * gl - R[i] + 0.5 * n / tau) + deta * gl;
        i_heat += wq * a;
        sc_wh += wq * (eta * (std::abs(l_tau) + gl * gl + std::abs(R[i]) + 0.5 * n / tau) + std::abs(deta * gl));
        const double c = eta * (-gl * gl + R[i] + (l[i] - n) / tau) - 2.0 * deta * gl;
        i_ell += wq * c;
        sc_we += wq * (eta * (gl * gl + std::abs(R[i]) + std::abs(l[i] - n) / tau) + 2.0 * std::abs(deta * gl));
      }
      if (!ok) continue;
      if (sc_wh > 0) lv.weak_l_heat = std::min(lv.weak_l_heat, i_heat / sc_wh);
      if (sc_we > 0) lv.weak_l_elliptic = std::min(lv.weak_l_elliptic, -i_ell / sc_we);
    }
    if (!std::isfinite(lv.weak_l_heat)) lv.weak_l_heat = 0.0;
    if (!std::isfinite(lv.weak_l_elliptic)) lv.weak_l_elliptic = 0.0;

    rep.max_res_Ltau = std::max(rep.max_res_Ltau, lv.res_Ltau);
    rep.max_res_gradL = std::max(rep.max_res_gradL, lv.res_gradL);
    rep.min_slack = std::min({rep.min_slack, lv.slack_lapL, lv.slack_l_heat, lv.slack_l_elliptic, lv.slack_Lbar});
    rep.min_weak = std::min({rep.min_weak, lv.weak_l_heat, lv.weak_l_elliptic});
    rep.levels.push_back(lv);
  }
  // Trace Harnack along the fan: H + R/tau + R/(t0 - tau - t_first) >= 0 for
  // nonnegative curvature operator; only reported.
  rep.max_harnack_gap = 0.0;
  for (const LPath& p : fan.paths) {
    for (const LSample& s : p.samples) {
      if (!(s.tau > 0.0)) continue;
      const double age = t0 - s.tau - h.t_first();
      if (!(age > 0.0)) continue;
      const double val = s.H + s.R / s.tau + s.R / age;
      const double scale = std::abs(s.H) + std::abs(s.R / s.tau) + std::abs(s.R / age) + 1e-300;
      rep.max_harnack_gap = std::max(rep.max_harnack_gap, -val / scale);
    }
  }
  if (!std::isfinite(rep.min_slack)) rep.min_slack = 0.0;
  if (!std::isfinite(rep.min_weak)) rep.min_weak = 0.0;
  return rep;
}

}  // namespace riccilab
