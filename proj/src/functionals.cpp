#include "riccilab/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "riccilab/errors.hpp"
#include "riccilab/parallel.hpp"
#include "riccilab/tridiag.hpp"

namespace riccilab {

using std::numbers::pi;

namespace {

void check_field(const WarpedMetric& g, const std::vector<double>& v, const char* what) {
  if (v.size() != g.size()) throw ParameterError(std::string(what) + " does not match the metric grid");
}

double sq(double x) { return x * x; }

}  // namespace

PotentialTerms potential_terms(const WarpedMetric& g, const ScalarField& f, double tau) {
  check_field(g, f.values, "potential");
  PotentialTerms pt;
  pt.geo = analyze(g);
  pt.df = differentiate(pt.geo, f.values);
  const double log_c = tau > 0.0 ? -0.5 * g.n * std::log(4.0 * pi * tau) : 0.0;
  pt.weight.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) pt.weight[i] = std::exp(log_c - f.values[i]);
  return pt;
}

double eval_F(const WarpedMetric& g, const ScalarField& f) {
  const PotentialTerms pt = potential_terms(g, f, 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    acc += pt.geo.quad_weight[i] * (pt.geo.curvature.R[i] + sq(pt.df.ds[i])) * pt.weight[i];
  }
  return acc;
}

double F_rate(const WarpedMetric& g, const ScalarField& f) {
  const PotentialTerms pt = potential_terms(g, f, 0.0);
  const auto& cf = pt.geo.curvature;
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double e = sq(cf.Ric_rad[i] + pt.df.dss[i]) + (g.n - 1) * sq(cf.Ric_sph[i] + pt.df.hess_sph[i]);
    acc += pt.geo.quad_weight[i] * e * pt.weight[i];
  }
  return 2.0 * acc;
}

double W_rate(const WarpedMetric& g, const ScalarField& f, double tau) {
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  const PotentialTerms pt = potential_terms(g, f, tau);
  const auto& cf = pt.geo.curvature;
  const double s = 0.5 / tau;
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double e = sq(cf.Ric_rad[i] + pt.df.dss[i] - s) + (g.n - 1) * sq(cf.Ric_sph[i] + pt.df.hess_sph[i] - s);
    acc += pt.geo.quad_weight[i] * e * pt.weight[i];
  }
  return 2.0 * tau * acc;
}

MetricVariation variation_from_profiles(const WarpedMetric& g, const std::vector<double>& d_phi,
                                        const std::vector<double>& d_psi) {
  check_field(g, d_phi, "phi variation");
  check_field(g, d_psi, "psi variation");
  const double h = g.spacing();
  const auto psi_x = derivative(g.psi, 1, Parity::odd, g.topology, h);
  const auto dpsi_x = derivative(d_psi, 1, Parity::odd, g.topology, h);
  MetricVariation v;
  v.v_rad.resize(g.size());
  v.v_sph.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    v.v_rad[i] = 2.0 * d_phi[i] / g.phi[i];
    v.v_sph[i] = g.is_pole(i) ? 2.0 * dpsi_x[i] / psi_x[i] : 2.0 * d_psi[i] / g.psi[i];
  }
  return v;
}

double first_variation_F(const WarpedMetric& g, const ScalarField& f, const MetricVariation& v,
                         const std::vector<double>& h) {
  check_field(g, v.v_rad, "v_rad");
  check_field(g, v.v_sph, "v_sph");
  check_field(g, h, "h");
  const PotentialTerms pt = potential_terms(g, f, 0.0);
  const auto& cf = pt.geo.curvature;
  const int n = g.n;
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double contraction =
        v.v_rad[i] * (cf.Ric_rad[i] + pt.df.dss[i]) + (n - 1) * v.v_sph[i] * (cf.Ric_sph[i] + pt.df.hess_sph[i]);
    const double trace = v.v_rad[i] + (n - 1) * v.v_sph[i];
    const double bracket = 2.0 * pt.df.laplacian[i] - sq(pt.df.ds[i]) + cf.R[i];
    acc += pt.geo.quad_weight[i] * pt.weight[i] * (-contraction + (0.5 * trace - h[i]) * bracket);
  }
  return acc;
}

EntropyReport eval_W(const WarpedMetric& g, const ScalarField& f, double tau) {
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  const PotentialTerms pt = potential_terms(g, f, tau);
  double w = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double q = pt.geo.quad_weight[i] * pt.weight[i];
    w += q * (tau * (sq(pt.df.ds[i]) + pt.geo.curvature.R[i]) + f.values[i] - g.n);
    mass += q;
  }
  EntropyReport rep;
  rep.value = w;
  rep.tau = tau;
  rep.constraint_residual = std::abs(mass - 1.0);
  return rep;
}

Thermo thermo(const WarpedMetric& g, const ScalarField& f, double tau) {
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  const PotentialTerms pt = potential_terms(g, f, tau);
  const auto& cf = pt.geo.curvature;
  const int n = g.n;
  const double s = 0.5 / tau;
  Thermo th;
  double w = 0.0, e = 0.0, fluct = 0.0, logz = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double dm = pt.geo.quad_weight[i] * pt.weight[i];
    const double grad2 = sq(pt.df.ds[i]);
    // Same expression as eval_W so that S = -W holds to roundoff.
    w += dm * (tau * (grad2 + cf.R[i]) + f.values[i] - n);
    e += dm * (cf.R[i] + grad2 - 0.5 * n / tau);
    logz += dm * (-f.values[i] + 0.5 * n);
    fluct += dm * (sq(cf.Ric_rad[i] + pt.df.dss[i] - s) + (n - 1) * sq(cf.Ric_sph[i] + pt.df.hess_sph[i] - s));
    th.mass += dm;
  }
  th.logZ = logz;
  th.E_avg = -tau * tau * e;
  th.S = -w;
  th.sigma = 2.0 * std::pow(tau, 4) * fluct;
  return th;
}

namespace {

// -4 Delta + R in finite-volume form, symmetrized by the control volumes:
// S = V^{-1/2} (4 L + V R) V^{-1/2} with L the graph Laplacian.
SymTridiag schrodinger_operator(const Geometry& geo) {
  const std::size_t m = geo.size();
  SymTridiag s;
  s.cyclic = geo.topology == Topology::periodic;
  s.diag.resize(m);
  s.off.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) s.diag[i] = geo.curvature.R[i] * geo.cell_volume[i];
  for (std::size_t f = 0; f < geo.face_conductance.size(); ++f) {
    const std::size_t j = (f + 1) % m;
    const double a = 4.0 * geo.face_conductance[f];
    s.diag[f] += a;
    s.diag[j] += a;
    s.off[f] = -a;
  }
  for (std::size_t f = 0; f < geo.face_conductance.size(); ++f) {
    const std::size_t j = (f + 1) % m;
    s.off[f] /= std::sqrt(geo.cell_volume[f] * geo.cell_volume[j]);
  }
  for (std::size_t i = 0; i < m; ++i) s.diag[i] /= geo.cell_volume[i];
  return s;
}

double norm2(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

struct GroundState {
  double value = 0.0;
  std::vector<double> u;  // nodal, sum V u^2 = 1, positive
  double residual = 0.0;
  int iterations = 0;
};

GroundState ground_state(const Geometry& geo) {
  const std::size_t m = geo.size();
  const SymTridiag s = schrodinger_operator(geo);
  std::vector<double> x(m);
  for (std::size_t i = 0; i < m; ++i) x[i] = std::sqrt(geo.cell_volume[i]);
  double nx = norm2(x);
  for (double& v : x) v /= nx;
  const double rmin = *std::min_element(geo.curvature.R.begin(), geo.curvature.R.end());
  double shift = rmin - 1.0;
  double rho = 0.0, res = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < 500; ++it) {
    const auto sx = s.apply(x);
    rho = dot(x, sx);
    std::vector<double> r(m);
    for (std::size_t i = 0; i < m; ++i) r[i] = sx[i] - rho * x[i];
    res = norm2(r);
    if (res <= 1e-11 * std::max(1.0, std::abs(rho))) break;
    shift = std::max(shift, rho - 2.0 * res);
    auto y = solve(s, x, shift);
    const double ny = norm2(y);
    if (!std::isfinite(ny) || ny == 0.0) break;
    for (std::size_t i = 0; i < m; ++i) x[i] = y[i] / ny;
  }
  if (!(res < 1e-8 * std::max(1.0, std::abs(rho)))) {
    throw NumericError("ground-state inverse iteration did not converge", res);
  }
  double total = 0.0;
  for (double v : x) total += v;
  const double sign = total < 0.0 ? -1.0 : 1.0;
  GroundState gs;
  gs.value = rho;
  gs.residual = res;
  gs.iterations = it;
  gs.u.resize(m);
  for (std::size_t i = 0; i < m; ++i) gs.u[i] = sign * x[i] / std::sqrt(geo.cell_volume[i]);
  return gs;
}

}  // namespace

EntropyReport lambda(const WarpedMetric& g) {
  const Geometry geo = analyze(g);
  const GroundState gs = ground_state(geo);
  EntropyReport rep;
  rep.value = gs.value;
  rep.solver_residual = gs.residual;
  rep.iterations = gs.iterations;
  ScalarField f{std::vector<double>(g.size()), FieldRole::potential};
  double mass = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double u = std::max(gs.u[i], std::numeric_limits<double>::min());
    f.values[i] = -2.0 * std::log(u);
    mass += geo.cell_volume[i] * u * u;
  }
  rep.constraint_residual = std::abs(mass - 1.0);
  rep.minimizer = std::move(f);
  return rep;
}

double lambda_bar(const WarpedMetric& g) {
  const double vol = total_volume(analyze(g));
  return lambda(g).value * std::pow(vol, 2.0 / g.n);
}

namespace {

// Discrete W in terms of w_hat with sum V w_hat^2 = 1:
// tau (4 E + sum V R w^2) - sum V w^2 log w^2 + log c - n.
struct MuProblem {
  const Geometry& geo;
  double tau;
  double log_c;
  int n;

  static constexpr double kFloor = 1e-150;

  double laplace_energy(const std::vector<double>& w) const {
    return fv_dirichlet_energy(geo, w);
  }

  double value(const std::vector<double>& w) const {
    double pot = 0.0, ent = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double w2 = w[i] * w[i];
      pot += geo.cell_volume[i] * geo.curvature.R[i] * w2;
      if (w2 > 0.0) ent += geo.cell_volume[i] * w2 * std::log(w2);
    }
    return tau * (4.0 * laplace_energy(w) + pot) - ent + log_c - n;
  }

  // Graph Laplacian L w (positive semidefinite form).
  std::vector<double> graph_laplacian(const std::vector<double>& w) const {
    const std::size_t m = w.size();
    std::vector<double> out(m, 0.0);
    for (std::size_t f = 0; f < geo.face_conductance.size(); ++f) {
      const std::size_t j = (f + 1) % m;
      const double flux = geo.face_conductance[f] * (w[f] - w[j]);
      out[f] += flux;
      out[j] -= flux;
    }
    return out;
  }

  std::vector<double> gradient(const std::vector<double>& w) const {
    const auto lw = graph_laplacian(w);
    std::vector<double> g(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double v = geo.cell_volume[i];
      const double lg = std::log(std::max(w[i] * w[i], kFloor * kFloor));
      g[i] = tau * (8.0 * lw[i] + 2.0 * v * geo.curvature.R[i] * w[i]) - v * (2.0 * w[i] * lg + 2.0 * w[i]);
    }
    return g;
  }

  double v_dot(const std::vector<double>& a, const std::vector<double>& b) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += geo.cell_volume[i] * a[i] * b[i];
    return acc;
  }

  void normalize(std::vector<double>& w) const {
    for (double& x : w) x = std::max(x, 0.0);
    const double nrm = std::sqrt(v_dot(w, w));
    for (double& x : w) x /= nrm;
  }

  // Multiplier and relative Euler-Lagrange residual.
  std::pair<double, double> residual(const std::vector<double>& w, const std::vector<double>& grad) const {
    const double lam = 0.5 * dot(w, grad);
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double r = grad[i] / geo.cell_volume[i] - 2.0 * lam * w[i];
      acc += geo.cell_volume[i] * r * r;
    }
    return {lam, 0.5 * std::sqrt(acc) / (1.0 + std::abs(lam))};
  }

  // 8 tau L + diag(extra): the Dirichlet part of the Hessian plus a diagonal.
  SymTridiag stiffness(const std::vector<double>& extra) const {
    const std::size_t m = geo.size();
    SymTridiag p;
    p.cyclic = geo.topology == Topology::periodic;
    p.diag = extra;
    p.off.assign(m, 0.0);
    for (std::size_t f = 0; f < geo.face_conductance.size(); ++f) {
      const std::size_t j = (f + 1) % m;
      const double a = 8.0 * tau * geo.face_conductance[f];
      p.diag[f] += a;
      p.diag[j] += a;
      p.off[f] = -a;
    }
    return p;
  }

  SymTridiag preconditioner() const {
    const double rmin = *std::min_element(geo.curvature.R.begin(), geo.curvature.R.end());
    std::vector<double> extra(geo.size());
    for (std::size_t i = 0; i < extra.size(); ++i) {
      extra[i] = 2.0 * geo.cell_volume[i] * (tau * (geo.curvature.R[i] - rmin) + 1.0);
    }
    return stiffness(extra);
  }
};

struct MuRun {
  bool converged = false;
  double value = std::numeric_limits<double>::infinity();
  double residual = std::numeric_limits<double>::infinity();
  std::vector<double> w;
  int iterations = 0;
};

MuRun minimize_from(const MuProblem& pb, std::vector<double> w, const MuOptions& opts) {
  MuRun run;
  pb.normalize(w);
  const SymTridiag precond = pb.preconditioner();
  double value = pb.value(w);
  int it = 0;
  // Projected, preconditioned gradient descent with Armijo backtracking.
  for (; it < opts.max_gradient_iterations; ++it) {
    const auto grad = pb.gradient(w);
    const auto [lam, res] = pb.residual(w, grad);
    if (res < std::max(opts.tolerance, 1e-4)) break;
    std::vector<double> g(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) g[i] = grad[i] - 2.0 * lam * pb.geo.cell_volume[i] * w[i];
    auto d = solve(precond, g);
    const double along = pb.v_dot(w, d);
    for (std::size_t i = 0; i < w.size(); ++i) d[i] = -(d[i] - along * w[i]);
    const double slope = dot(g, d);
    if (!(slope < 0.0)) break;
    double alpha = 1.0;
    bool accepted = false;
    for (int k = 0; k < 50; ++k, alpha *= 0.5) {
      std::vector<double> trial(w.size());
      for (std::size_t i = 0; i < w.size(); ++i) trial[i] = w[i] + alpha * d[i];
      pb.normalize(trial);
      const double tv = pb.value(trial);
      if (tv <= value + 1e-4 * alpha * slope) {
        w = std::move(trial);
        value = tv;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  // Newton polishing on the bordered Euler-Lagrange system.
  const std::size_t m = w.size();
  for (int k = 0; k < opts.max_newton_iterations; ++k, ++it) {
    const auto grad = pb.gradient(w);
    const auto [lam, res] = pb.residual(w, grad);
    run.residual = res;
    if (res < opts.tolerance) {
      run.converged = true;
      break;
    }
    std::vector<double> F1(m), vw(m);
    for (std::size_t i = 0; i < m; ++i) {
      vw[i] = pb.geo.cell_volume[i] * w[i];
      F1[i] = grad[i] - 2.0 * lam * vw[i];
    }
    const double F2 = 0.5 * (dot(vw, w) - 1.0);
    std::vector<double> extra(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double v = pb.geo.cell_volume[i];
      const double lg = std::log(std::max(w[i] * w[i], MuProblem::kFloor * MuProblem::kFloor));
      extra[i] = 2.0 * v * pb.tau * pb.geo.curvature.R[i] - v * (2.0 * lg + 6.0) - 2.0 * lam * v;
    }
    const SymTridiag J = pb.stiffness(extra);
    std::vector<double> minusF1(m), two_vw(m);
    for (std::size_t i = 0; i < m; ++i) {
      minusF1[i] = -F1[i];
      two_vw[i] = 2.0 * vw[i];
    }
    std::vector<double> y, z;
    try {
      y = solve(J, minusF1);
      z = solve(J, two_vw);
    } catch (const NumericError&) {
      break;
    }
    const double denom = dot(vw, z);
    if (denom == 0.0 || !std::isfinite(denom)) break;
    const double dlam = (-F2 - dot(vw, y)) / denom;
    std::vector<double> dw(m);
    for (std::size_t i = 0; i < m; ++i) dw[i] = y[i] + dlam * z[i];
    // Damped step: accept the first one that lowers the residual.
    double alpha = 1.0;
    bool accepted = false;
    for (int b = 0; b < 30; ++b, alpha *= 0.5) {
      std::vector<double> trial(m);
      for (std::size_t i = 0; i < m; ++i) trial[i] = std::max(w[i] + alpha * dw[i], 0.0);
      pb.normalize(trial);
      const auto tg = pb.gradient(trial);
      const double tres = pb.residual(trial, tg).second;
      if (std::isfinite(tres) && tres < res) {
        w = std::move(trial);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (!run.converged) {
    const auto grad = pb.gradient(w);
    run.residual = pb.residual(w, grad).second;
    run.converged = run.residual < opts.tolerance;
  }
  run.value = pb.value(w);
  run.w = std::move(w);
  run.iterations = it;
  return run;
}

}  // namespace

EntropyReport mu(const WarpedMetric& g, double tau, const MuOptions& opts) {
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  const Geometry geo = analyze(g);
  const MuProblem pb{geo, tau, -0.5 * g.n * std::log(4.0 * pi * tau), g.n};
  const std::size_t m = g.size();

  std::vector<std::vector<double>> starts;
  starts.push_back(ground_state(geo).u);
  // The symmetric ground state can be a saddle (it is on round spheres), so
  // also start from Gaussians centred at the poles.
  const auto s = arclength(g);
  std::vector<std::size_t> centers;
  if (g.topology != Topology::periodic) centers.push_back(0);
  if (g.topology == Topology::sphere) centers.push_back(m - 1);
  for (std::size_t c : centers) {
    std::vector<double> w(m);
    for (std::size_t i = 0; i < m; ++i) w[i] = std::exp(-sq(s[i] - s[c]) / (8.0 * tau));
    starts.push_back(std::move(w));
  }

  MuRun best;
  double worst_residual = 0.0;
  for (auto& w0 : starts) {
    MuRun r = minimize_from(pb, std::move(w0), opts);
    if (!r.converged) {
      worst_residual = std::max(worst_residual, r.residual);
      continue;
    }
    if (r.value < best.value) best = std::move(r);
  }
  if (!best.converged) {
    throw NumericError("mu minimization did not reach the Euler-Lagrange tolerance", worst_residual);
  }
  EntropyReport rep;
  rep.value = best.value;
  rep.tau = tau;
  rep.solver_residual = best.residual;
  rep.iterations = best.iterations;
  ScalarField f{std::vector<double>(m), FieldRole::potential};
  double mass = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double w = std::max(best.w[i], MuProblem::kFloor);
    f.values[i] = -2.0 * std::log(w) + pb.log_c;
    mass += geo.cell_volume[i] * best.w[i] * best.w[i];
  }
  rep.constraint_residual = std::abs(mass - 1.0);
  rep.minimizer = std::move(f);
  return rep;
}

NuResult nu(const WarpedMetric& g, const NuOptions& opts) {
  if (!(opts.lo_factor > 0.0 && opts.hi_factor > opts.lo_factor) || opts.scan_points < 3) {
    throw ParameterError("invalid nu bracket");
  }
  const auto s = arclength(g);
  double diam = s.back();
  if (g.topology == Topology::periodic) diam = 0.5 * (s.back() + g.phi.back() * g.spacing());
  const double lo = std::log(opts.lo_factor * diam * diam);
  const double hi = std::log(opts.hi_factor * diam * diam);
  NuResult out;
  const auto count = static_cast<std::size_t>(opts.scan_points);
  out.scan_tau.resize(count);
  out.scan_mu.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    out.scan_tau[k] = std::exp(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1));
  }
  auto mu_or_inf = [&](double tau) {
    try {
      return mu(g, tau, opts.mu).value;
    } catch (const NumericError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  parallel_for(count, opts.jobs, [&](std::size_t k) { out.scan_mu[k] = mu_or_inf(out.scan_tau[k]); });
  const auto kmin = static_cast<std::size_t>(
      std::min_element(out.scan_mu.begin(), out.scan_mu.end()) - out.scan_mu.begin());
  if (!std::isfinite(out.scan_mu[kmin])) throw NumericError("mu failed on the whole nu bracket", 0.0);
  if (kmin == 0 || kmin + 1 == count) {
    out.at_bracket_edge = true;
    out.value = out.scan_mu[kmin];
    out.tau = out.scan_tau[kmin];
    return out;
  }
  // Golden-section search in log tau between the neighbours of the scan minimum.
  double a = std::log(out.scan_tau[kmin - 1]), b = std::log(out.scan_tau[kmin + 1]);
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - ratio * (b - a), d = a + ratio * (b - a);
  double fc = mu_or_inf(std::exp(c)), fd = mu_or_inf(std::exp(d));
  while (b - a > opts.log_tau_tolerance) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = mu_or_inf(std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = mu_or_inf(std::exp(d));
    }
  }
  const double best_scan = out.scan_mu[kmin];
  if (std::min(fc, fd) <= best_scan) {
    out.value = std::min(fc, fd);
    out.tau = std::exp(fc < fd ? c : d);
  } else {
    out.value = best_scan;
    out.tau = out.scan_tau[kmin];
  }
  return out;
}

}  // namespace riccilab
