#include "riccilab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "riccilab/errors.hpp"
#include "riccilab/parallel.hpp"

namespace riccilab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Closed arclength of a periodic grid (the wrap interval included).
double periodic_length(const WarpedMetric& g) {
  const double h = g.spacing();
  double acc = 0.0;
  for (double p : g.phi) acc += p * h;
  return acc;
}

}  // namespace

KappaResult kappa_scan(const WarpedMetric& g, double rho, const KappaOptions& opts) {
  if (!(rho > 0.0)) throw ParameterError("kappa_scan: rho must be positive");
  if (opts.radii < 1) throw ParameterError("kappa_scan: need at least one radius");
  validate(g);
  const std::size_t m = g.size();
  const auto rm = curvature(g).rm_norm(g.n);
  std::vector<double> s = arclength(g);
  const double length = g.topology == Topology::periodic ? periodic_length(g) : s.back();
  auto dist = [&](std::size_t a, std::size_t b) {
    double d = std::abs(s[b] - s[a]);
    if (g.topology == Topology::periodic) d = std::min(d, length - d);
    return d;
  };

  std::vector<KappaResult> per(m);
  parallel_for(m, opts.jobs, [&](std::size_t c) {
    KappaResult best;
    best.kappa = kInf;
    AxisBalls balls(g, c);
    // Nodes sorted by distance from c give sup |Rm| over growing slabs.
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double da = dist(c, a), db = dist(c, b);
      return da != db ? da < db : a < b;
    });
    std::size_t reached = 0;
    double sup_rm = 0.0;
    for (int k = 1; k <= opts.radii; ++k) {
      const double r = rho * k / opts.radii;
      while (reached < m && dist(c, order[reached]) < r) sup_rm = std::max(sup_rm, rm[order[reached++]]);
      // Relative slack for curvature that equals r^{-2} up to discretization.
      if (sup_rm * r * r > 1.0 + 1e-4) break;
      const double vol = balls(r).volume;
      const double ratio = vol / std::pow(r, g.n);
      if (ratio < best.kappa) {
        best.kappa = ratio;
        best.admissible_found = true;
        best.center = c;
        best.radius = r;
        best.volume = vol;
      }
    }
    per[c] = best;
  });
  KappaResult out;
  out.kappa = kInf;
  for (const auto& r : per) {
    if (r.admissible_found && r.kappa < out.kappa) out = r;
  }
  return out;
}

CollapseReport collapse_detector(const FlowHistory& h, double T, double floor_ratio,
                                 const KappaOptions& opts) {
  if (h.empty()) throw ParameterError("empty history");
  if (!(T > h.t_first())) throw ParameterError("collapse_detector: T must exceed the first time");
  CollapseReport rep;
  rep.scale = std::sqrt(T - h.t_first());
  rep.floor_ratio = floor_ratio;
  rep.note =
      "time-slice scan of kappa at a fixed scale; the sequence-based notion of local collapsing "
      "at T is only approximated by the trend of kappa(t)";
  rep.min_kappa = kInf;
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double t = h.times()[k];
    if (t > T) break;
    const KappaResult r = kappa_scan(h.snapshot(k), rep.scale, opts);
    rep.times.push_back(t);
    rep.kappa.push_back(r.kappa);
    rep.min_kappa = std::min(rep.min_kappa, r.kappa);
  }
  rep.bounded_away = !rep.kappa.empty() && std::isfinite(rep.kappa.front()) &&
                     rep.min_kappa > floor_ratio * rep.kappa.front();
  return rep;
}

std::vector<NeckCenter> neck_detect(const WarpedMetric& g, double eps) {
  if (!(eps > 0.0 && eps < 0.5)) throw ParameterError("neck_detect: eps must lie in (0, 0.5)");
  if (g.n < 3) throw ParameterError("neck_detect: needs n >= 3 (no round cylinder with R = 1)");
  validate(g);
  const Geometry geo = analyze(g, false);
  const std::size_t m = g.size();
  const double rbar = std::sqrt(static_cast<double>((g.n - 1) * (g.n - 2)));
  std::vector<double> s = arclength(g);
  const double length = g.topology == Topology::periodic ? periodic_length(g) : s.back();
  std::vector<NeckCenter> out;
  for (std::size_t c = 0; c < m; ++c) {
    if (geo.pole[c]) continue;
    const double Q = geo.curvature.R[c];
    if (!(Q > 0.0)) continue;
    const double sq = std::sqrt(Q);
    const double half = 1.0 / std::sqrt(eps * Q);
    if (g.topology != Topology::periodic && (s[c] - half < 0.0 || s[c] + half > length)) continue;
    double worst = 0.0;
    for (std::size_t i = 0; i < m && worst <= eps; ++i) {
      double d = std::abs(s[i] - s[c]);
      if (g.topology == Topology::periodic) d = std::min(d, length - d);
      if (d >= half) continue;
      if (geo.pole[i]) {
        worst = kInf;
        break;
      }
      const double psi = sq * g.psi[i];
      worst = std::max({worst, std::abs(psi - rbar) / rbar, std::abs(geo.psi_s[i]),
                        rbar * std::abs(geo.psi_ss[i]) / sq});
    }
    if (worst <= eps) out.push_back({c, g.x[c], worst});
  }
  return out;
}

namespace {

// Arclength from x = 0 at t +- dt (centered where the history allows).
void distance_rate(const FlowHistory& h, double t, std::vector<double>& rate) {
  const double span = h.t_last() - h.t_first();
  double dt = 1e-4 * span;
  if (h.size() > 1) {
    const auto& ts = h.times();
    double gap = kInf;
    for (std::size_t k = 1; k < ts.size(); ++k) gap = std::min(gap, ts[k] - ts[k - 1]);
    dt = std::min(dt, 0.25 * gap);
  }
  const double t_lo = std::max(h.t_first(), t - dt);
  const double t_hi = std::min(h.t_last(), t + dt);
  if (!(t_hi > t_lo)) {
    rate.assign(h.snapshot(0).size(), 0.0);
    return;
  }
  const auto s_lo = arclength(h.at(t_lo));
  const auto s_hi = arclength(h.at(t_hi));
  rate.resize(s_lo.size());
  for (std::size_t i = 0; i < rate.size(); ++i) rate[i] = (s_hi[i] - s_lo[i]) / (t_hi - t_lo);
}

double measured_K(const Geometry& geo, const std::vector<double>& s, double center_s, double r0, int n) {
  double K = -kInf;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (std::abs(s[i] - center_s) >= r0) continue;
    K = std::max({K, geo.curvature.Ric_rad[i] / (n - 1), geo.curvature.Ric_sph[i] / (n - 1)});
  }
  return K;
}

}  // namespace

DistanceLemmaReport distance_lemma_check(const FlowHistory& h, double t, double r0,
                                         std::optional<double> K_bound) {
  if (h.empty()) throw ParameterError("empty history");
  if (h.topology() == Topology::periodic) {
    throw ParameterError("distance_lemma_check: needs a pole (sphere or ball topology)");
  }
  if (!(r0 > 0.0)) throw ParameterError("distance_lemma_check: r0 must be positive");
  if (t < h.t_first() || t > h.t_last()) throw RangeError("time outside the history");
  const WarpedMetric g = h.at(t);
  const Geometry geo = analyze(g, false);
  const int n = g.n;
  const std::vector<double> s = arclength(g);
  const std::size_t m = g.size();

  DistanceLemmaReport rep;
  rep.t = t;
  rep.r0 = r0;
  double K = measured_K(geo, s, 0.0, r0, n);
  if (g.topology == Topology::sphere) K = std::max(K, measured_K(geo, s, s.back(), r0, n));
  rep.K_measured = K;
  if (K_bound) {
    rep.precondition_ok = *K_bound >= K - 1e-12 * std::max(1.0, std::abs(K));
    if (!rep.precondition_ok) return rep;
    K = *K_bound;
  }
  const double bound = (n - 1) * (2.0 / 3.0 * K * r0 + 1.0 / r0);

  std::vector<double> d_t;
  distance_rate(h, t, d_t);
  rep.min_slack_local = kInf;
  for (std::size_t i = 0; i < m; ++i) {
    if (geo.pole[i] || s[i] <= r0) continue;
    // d = s, so Delta d = (n - 1) psi_s / psi.
    const double lap = (n - 1) * geo.psi_s_over_psi[i];
    const double slack = d_t[i] - lap + bound;
    ++rep.checked;
    if (slack < rep.min_slack_local) {
      rep.min_slack_local = slack;
      rep.worst_node = i;
    }
  }
  if (rep.checked == 0) rep.min_slack_local = 0.0;
  if (g.topology == Topology::sphere) {
    rep.pair_rate = d_t.back();
    rep.pair_slack = d_t.back() + 2.0 * bound;
  }
  return rep;
}

DistanceLemmaReport distance_lemma_best_pair(const FlowHistory& h, double t, double r_lo, double r_hi,
                                             int count) {
  if (h.topology() != Topology::sphere) throw ParameterError("pole pairs need sphere topology");
  if (!(r_lo > 0.0 && r_hi >= r_lo) || count < 1) throw ParameterError("invalid r0 range");
  DistanceLemmaReport best;
  bool have = false;
  for (int k = 0; k < count; ++k) {
    const double r0 = count == 1 ? r_lo : r_lo * std::pow(r_hi / r_lo, static_cast<double>(k) / (count - 1));
    DistanceLemmaReport rep = distance_lemma_check(h, t, r0);
    if (!have || *rep.pair_slack < *best.pair_slack) {
      best = rep;
      have = true;
    }
  }
  return best;
}

}  // namespace riccilab
