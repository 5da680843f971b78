#include "riccilab/geometry.hpp"

#include <algorithm>

#include <cmath>
#include <limits>
#include <numbers>

#include "riccilab/detail/pchip.hpp"
#include "riccilab/errors.hpp"

namespace riccilab {

using std::numbers::pi;

double WarpedMetric::spacing() const {
  const auto m = static_cast<double>(size());
  return topology == Topology::periodic ? 1.0 / m : 1.0 / (m - 1.0);
}

bool WarpedMetric::is_pole(std::size_t i) const {
  if (topology == Topology::sphere) return i == 0 || i + 1 == size();
  if (topology == Topology::ball) return i == 0;
  return false;
}

std::string to_string(Topology t) {
  switch (t) {
    case Topology::sphere: return "sphere";
    case Topology::periodic: return "cylinder-periodic";
    case Topology::ball: return "ball";
  }
  return "unknown";
}

Topology topology_from_string(const std::string& s) {
  if (s == "sphere") return Topology::sphere;
  if (s == "cylinder-periodic" || s == "periodic" || s == "cylinder") return Topology::periodic;
  if (s == "ball") return Topology::ball;
  throw ParameterError("unknown topology '" + s + "'");
}

std::vector<double> make_grid(Topology topology, std::size_t m) {
  std::vector<double> x(m);
  const double h = topology == Topology::periodic ? 1.0 / static_cast<double>(m)
                                                  : 1.0 / (static_cast<double>(m) - 1.0);
  for (std::size_t i = 0; i < m; ++i) x[i] = static_cast<double>(i) * h;
  if (topology != Topology::periodic) x.back() = 1.0;
  return x;
}

void validate(const WarpedMetric& g, double pole_tolerance) {
  const std::size_t m = g.size();
  if (g.n < 2) throw ParameterError("dimension n must be >= 2");
  if (m < 16) throw ParameterError("grid size m must be >= 16");
  if (g.phi.size() != m || g.psi.size() != m) throw ParameterError("x, phi, psi sizes differ");
  const double h = g.spacing();
  for (std::size_t i = 0; i < m; ++i) {
    if (std::abs(g.x[i] - static_cast<double>(i) * h) > 1e-12) {
      throw ParameterError("grid must be uniform on [0,1] for the given topology");
    }
    if (!(g.phi[i] > 0.0) || !std::isfinite(g.phi[i])) throw ParameterError("phi must be positive");
    if (!g.is_pole(i) && !(g.psi[i] > 0.0)) throw ParameterError("psi must be positive in the interior");
  }
  if (g.topology == Topology::periodic) return;
  const auto psi_x = derivative(g.psi, 1, Parity::odd, g.topology, h);
  const double scale = *std::max_element(g.psi.begin(), g.psi.end());
  auto check_pole = [&](std::size_t i, double expected) {
    if (std::abs(g.psi[i]) > pole_tolerance * scale) {
      throw ConstructionError("psi must vanish at a pole");
    }
    const double slope = psi_x[i] / g.phi[i];
    if (std::abs(slope - expected) > pole_tolerance) {
      throw ConstructionError("pole smoothness violated: psi_s = " + std::to_string(slope));
    }
  };
  check_pole(0, 1.0);
  if (g.topology == Topology::sphere) check_pole(m - 1, -1.0);
}

WarpedMetric build_round_sphere(int n, double radius, std::size_t m) {
  if (n < 2) throw ParameterError("dimension n must be >= 2");
  if (!(radius > 0.0)) throw ParameterError("radius must be positive");
  if (m < 16) throw ParameterError("grid size m must be >= 16");
  WarpedMetric g{n, Topology::sphere, make_grid(Topology::sphere, m), {}, {}};
  g.phi.assign(m, pi * radius);
  g.psi.resize(m);
  for (std::size_t i = 0; i < m; ++i) g.psi[i] = radius * std::sin(pi * g.x[i]);
  g.psi.front() = 0.0;
  g.psi.back() = 0.0;
  validate(g);
  return g;
}

namespace {

// Maximum over y in [0,1] of y (1 - A y^2).
double bump_height(double a) {
  const double y = a > 1.0 / 3.0 ? 1.0 / std::sqrt(3.0 * a) : 1.0;
  return y * (1.0 - a * y * y);
}

}  // namespace

WarpedMetric build_dumbbell(int n, double neck_radius, double bump_radius, std::size_t m) {
  if (n < 2) throw ParameterError("dimension n must be >= 2");
  if (m < 16) throw ParameterError("grid size m must be >= 16");
  if (!(neck_radius > 0.0) || !(neck_radius < bump_radius)) {
    throw ParameterError("dumbbell requires 0 < neck_radius < bump_radius");
  }
  const double target = neck_radius / bump_radius;
  double lo = 1.0 / 3.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double ratio = (1.0 - mid) / bump_height(mid);
    (ratio > target ? lo : hi) = mid;
  }
  const double a = 0.5 * (lo + hi);
  const double c = bump_radius / bump_height(a);

  WarpedMetric g{n, Topology::sphere, make_grid(Topology::sphere, m), {}, {}};
  g.phi.assign(m, c * pi);
  g.psi.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double y = std::sin(pi * g.x[i]);
    g.psi[i] = c * y * (1.0 - a * y * y);
  }
  g.psi.front() = 0.0;
  g.psi.back() = 0.0;
  validate(g);
  return g;
}

WarpedMetric build_cylinder(int n, double radius, double length, std::size_t m) {
  if (n < 2) throw ParameterError("dimension n must be >= 2");
  if (!(radius > 0.0) || !(length > 0.0)) throw ParameterError("radius and length must be positive");
  if (m < 16) throw ParameterError("grid size m must be >= 16");
  WarpedMetric g{n, Topology::periodic, make_grid(Topology::periodic, m), {}, {}};
  g.phi.assign(m, length);
  g.psi.assign(m, radius);
  validate(g);
  return g;
}

WarpedMetric build_flat_ball(int n, double outer_radius, std::size_t m) {
  if (n < 2) throw ParameterError("dimension n must be >= 2");
  if (!(outer_radius > 0.0)) throw ParameterError("outer radius must be positive");
  if (m < 16) throw ParameterError("grid size m must be >= 16");
  WarpedMetric g{n, Topology::ball, make_grid(Topology::ball, m), {}, {}};
  g.phi.assign(m, outer_radius);
  g.psi.resize(m);
  for (std::size_t i = 0; i < m; ++i) g.psi[i] = outer_radius * g.x[i];
  validate(g);
  return g;
}

WarpedMetric scaled(const WarpedMetric& g, double c) {
  if (!(c > 0.0)) throw ParameterError("scale factor must be positive");
  WarpedMetric out = g;
  for (auto& v : out.phi) v *= c;
  for (auto& v : out.psi) v *= c;
  return out;
}

std::vector<double> CurvatureField::rm_norm(int n) const {
  std::vector<double> out(K_rad.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = n == 2 ? std::abs(K_rad[i]) : std::max(std::abs(K_rad[i]), std::abs(K_sph[i]));
  }
  return out;
}

double unit_sphere_volume(int k) {
  const double half = 0.5 * (k + 1);
  return 2.0 * std::pow(pi, half) / std::tgamma(half);
}

FvWeights fv_weights(const WarpedMetric& g) {
  const std::size_t m = g.size();
  const double h = g.spacing();
  const int n = g.n;
  FvWeights fv;
  const double omega = unit_sphere_volume(n - 1);
  // Volume density phi psi^{n-1} between nodes, fourth-order interpolated, so
  // that cell volumes (Simpson per cell) are exact for the polynomial
  // densities near a pole.
  auto density = [&](double x) {
    const double phi = interpolate(g.phi, x, Parity::even, g.topology, h);
    const double psi = interpolate(g.psi, x, Parity::odd, g.topology, h);
    return phi * std::pow(std::abs(psi), n - 1);
  };
  // Simpson on each half cell [x_i - h/2, x_i] and [x_i, x_i + h/2].
  std::vector<double> node(m), half(m + 1);
  for (std::size_t i = 0; i < m; ++i) node[i] = g.phi[i] * std::pow(std::abs(g.psi[i]), n - 1);
  for (std::size_t i = 0; i <= m; ++i) {
    const bool outside = g.topology != Topology::periodic && (i == 0 || i == m);
    half[i] = outside ? 0.0 : density((static_cast<double>(i) - 0.5) * h);
  }
  fv.cell_volume.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double xi = static_cast<double>(i) * h;
    const bool closed = g.topology != Topology::periodic;
    double vol = 0.0;
    if (!(closed && i == 0)) vol += half[i] + 4.0 * density(xi - 0.25 * h) + node[i];
    if (!(closed && i + 1 == m)) vol += node[i] + 4.0 * density(xi + 0.25 * h) + half[i + 1];
    fv.cell_volume[i] = omega * h / 12.0 * vol;
  }
  const std::size_t faces = g.topology == Topology::periodic ? m : m - 1;
  fv.face_conductance.resize(faces);
  for (std::size_t f = 0; f < faces; ++f) {
    const double xf = (static_cast<double>(f) + 0.5) * h;
    const double psi_half = interpolate(g.psi, xf, Parity::odd, g.topology, h);
    const double phi_half = interpolate(g.phi, xf, Parity::even, g.topology, h);
    fv.face_conductance[f] = omega * std::pow(psi_half, n - 1) / (phi_half * h);
  }
  return fv;
}

Geometry analyze(const WarpedMetric& g, bool with_weights) {
  const std::size_t m = g.size();
  if (g.phi.size() != m || g.psi.size() != m || m < 16) {
    throw ParameterError("analyze: malformed metric");
  }
  Geometry geo;
  geo.n = g.n;
  geo.topology = g.topology;
  geo.h = g.spacing();
  geo.phi = g.phi;
  geo.psi = g.psi;
  const double h = geo.h;
  const int n = g.n;

  geo.phi_x = derivative(g.phi, 1, Parity::even, g.topology, h);
  const auto phi_xx = derivative(g.phi, 2, Parity::even, g.topology, h);
  geo.psi_x = derivative(g.psi, 1, Parity::odd, g.topology, h);
  const auto psi_xx = derivative(g.psi, 2, Parity::odd, g.topology, h);
  std::vector<double> psi_xxx;
  if (g.topology != Topology::periodic) psi_xxx = derivative(g.psi, 3, Parity::odd, g.topology, h);

  geo.psi_s.resize(m);
  geo.psi_ss.resize(m);
  geo.psi_s_over_psi.resize(m);
  geo.pole.assign(m, 0);
  auto& cf = geo.curvature;
  cf.K_rad.resize(m);
  cf.K_sph.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double phi = g.phi[i];
    const double psi = g.psi[i];
    geo.psi_s[i] = geo.psi_x[i] / phi;
    if (g.is_pole(i)) {
      geo.pole[i] = 1;
      geo.psi_ss[i] = 0.0;
      geo.psi_s_over_psi[i] = 0.0;
      const double psi_sss =
          psi_xxx[i] / (phi * phi * phi) - geo.psi_x[i] * phi_xx[i] / (phi * phi * phi * phi);
      const double k = -psi_sss / geo.psi_s[i];
      cf.K_rad[i] = k;
      cf.K_sph[i] = k;
      continue;
    }
    if (!(psi >= kPositivityFloor)) {
      throw NearSingularError("interior psi below positivity floor at node " + std::to_string(i));
    }
    geo.psi_ss[i] = psi_xx[i] / (phi * phi) - geo.psi_x[i] * geo.phi_x[i] / (phi * phi * phi);
    geo.psi_s_over_psi[i] = geo.psi_s[i] / psi;
    cf.K_rad[i] = -geo.psi_ss[i] / psi;
    cf.K_sph[i] = (1.0 - geo.psi_s[i] * geo.psi_s[i]) / (psi * psi);
  }
  cf.Ric_rad.resize(m);
  cf.Ric_sph.resize(m);
  cf.R.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    cf.Ric_rad[i] = (n - 1) * cf.K_rad[i];
    cf.Ric_sph[i] = cf.K_rad[i] + (n - 2) * cf.K_sph[i];
    cf.R[i] = 2.0 * (n - 1) * cf.K_rad[i] + static_cast<double>((n - 1) * (n - 2)) * cf.K_sph[i];
  }

  if (!with_weights) return geo;
  auto fv = fv_weights(g);
  geo.cell_volume = std::move(fv.cell_volume);
  geo.face_conductance = std::move(fv.face_conductance);
  const double omega = unit_sphere_volume(n - 1);
  geo.quad_weight.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const bool end = g.topology != Topology::periodic && (i == 0 || i + 1 == m);
    geo.quad_weight[i] = omega * (end ? 0.5 * h : h) * g.phi[i] * std::pow(g.psi[i], n - 1);
  }
  return geo;
}

CurvatureField curvature(const WarpedMetric& g) { return analyze(g, false).curvature; }

ScalarDerivatives differentiate(const Geometry& geo, std::span<const double> f) {
  const std::size_t m = geo.size();
  if (f.size() != m) throw ParameterError("field size does not match the metric grid");
  const auto f_x = derivative(f, 1, Parity::even, geo.topology, geo.h);
  const auto f_xx = derivative(f, 2, Parity::even, geo.topology, geo.h);
  ScalarDerivatives d;
  d.ds.resize(m);
  d.dss.resize(m);
  d.laplacian.resize(m);
  d.hess_sph.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double phi = geo.phi[i];
    d.dss[i] = f_xx[i] / (phi * phi) - f_x[i] * geo.phi_x[i] / (phi * phi * phi);
    if (geo.pole[i]) {
      d.ds[i] = 0.0;
      d.hess_sph[i] = d.dss[i];
      d.laplacian[i] = geo.n * d.dss[i];
    } else {
      d.ds[i] = f_x[i] / phi;
      d.hess_sph[i] = geo.psi_s_over_psi[i] * d.ds[i];
      d.laplacian[i] = d.dss[i] + (geo.n - 1) * d.hess_sph[i];
    }
  }
  return d;
}

std::vector<double> fv_laplacian(const Geometry& geo, std::span<const double> u) {
  const std::size_t m = geo.size();
  if (u.size() != m) throw ParameterError("field size does not match the metric grid");
  std::vector<double> out(m, 0.0);
  const std::size_t faces = geo.face_conductance.size();
  for (std::size_t f = 0; f < faces; ++f) {
    const std::size_t j = (f + 1) % m;
    const double flux = geo.face_conductance[f] * (u[j] - u[f]);
    out[f] += flux;
    out[j] -= flux;
  }
  for (std::size_t i = 0; i < m; ++i) out[i] /= geo.cell_volume[i];
  return out;
}

double fv_dirichlet_energy(const Geometry& geo, std::span<const double> u) {
  const std::size_t m = geo.size();
  double e = 0.0;
  for (std::size_t f = 0; f < geo.face_conductance.size(); ++f) {
    const double du = u[(f + 1) % m] - u[f];
    e += geo.face_conductance[f] * du * du;
  }
  return e;
}

double integrate(const Geometry& geo, std::span<const double> values) {
  if (values.size() != geo.size()) throw ParameterError("field size does not match the metric grid");
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) acc += geo.quad_weight[i] * values[i];
  return acc;
}

double integrate(const WarpedMetric& g, const ScalarField& field) {
  if (field.values.size() != g.size()) throw ParameterError("field size does not match the metric grid");
  return integrate(analyze(g), field.values);
}

double total_volume(const Geometry& geo) {
  double acc = 0.0;
  for (double v : geo.quad_weight) acc += v;
  return acc;
}

namespace {

// Corrected-trapezoid cumulative integral of a nodal integrand; periodic
// grids get one extra entry for the wrap-around interval.
std::vector<double> cumulative(const WarpedMetric& g, std::span<const double> f, Parity parity) {
  const std::size_t m = g.size();
  const double h = g.spacing();
  const auto fx = derivative(f, 1, parity, g.topology, h);
  const std::size_t intervals = g.topology == Topology::periodic ? m : m - 1;
  std::vector<double> out(intervals + 1, 0.0);
  for (std::size_t i = 0; i < intervals; ++i) {
    const std::size_t j = (i + 1) % m;
    out[i + 1] = out[i] + 0.5 * h * (f[i] + f[j]) - h * h / 12.0 * (fx[j] - fx[i]);
  }
  return out;
}

std::vector<double> volume_density(const WarpedMetric& g) {
  const double omega = unit_sphere_volume(g.n - 1);
  std::vector<double> f(g.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = omega * g.phi[i] * std::pow(g.psi[i], g.n - 1);
  return f;
}

}  // namespace

std::vector<double> arclength(const WarpedMetric& g) {
  auto s = cumulative(g, g.phi, Parity::even);
  s.resize(g.size());
  return s;
}

std::vector<double> cumulative_volume(const WarpedMetric& g) {
  const auto f = volume_density(g);
  auto v = cumulative(g, f, (g.n - 1) % 2 == 0 ? Parity::even : Parity::odd);
  v.resize(g.size());
  return v;
}

AxisBalls::AxisBalls(const WarpedMetric& g, std::size_t center) : topology_(g.topology) {
  if (center >= g.size()) throw ParameterError("ball center outside the grid");
  s_ = cumulative(g, g.phi, Parity::even);
  const auto f = volume_density(g);
  cum_ = cumulative(g, f, (g.n - 1) % 2 == 0 ? Parity::even : Parity::odd);
  s_center_ = s_[center];
  length_ = s_.back();
  if (topology_ == Topology::periodic) {
    max_radius_ = 0.5 * length_;
  } else {
    max_radius_ = std::max(s_center_, length_ - s_center_);
  }
}

double AxisBalls::volume_below(double s) const {
  if (s <= 0.0) return 0.0;
  if (s >= length_) return cum_.back();
  auto it = std::upper_bound(s_.begin(), s_.end(), s);
  const std::size_t j = static_cast<std::size_t>(it - s_.begin()) - 1;
  // Local monotone cubic on a window of nodes around the bracketing interval.
  const std::size_t lo = j >= 2 ? j - 2 : 0;
  const std::size_t hi = std::min(s_.size() - 1, lo + 5);
  std::vector<double> xs(s_.begin() + lo, s_.begin() + hi + 1);
  std::vector<double> ys(cum_.begin() + lo, cum_.begin() + hi + 1);
  boost::math::interpolators::pchip<std::vector<double>> interp(std::move(xs), std::move(ys));
  return interp(s);
}

BallVolume AxisBalls::operator()(double r) const {
  if (!(r >= 0.0)) throw ParameterError("ball radius must be nonnegative");
  BallVolume out;
  if (r >= max_radius_) {
    out.volume = cum_.back();
    out.clamped = r > max_radius_;
    return out;
  }
  double lo = s_center_ - r, hi = s_center_ + r;
  if (topology_ != Topology::periodic) {
    out.volume = volume_below(std::min(hi, length_)) - volume_below(std::max(lo, 0.0));
    return out;
  }
  double v = 0.0;
  if (lo < 0.0) {
    v += volume_below(hi) + (cum_.back() - volume_below(lo + length_));
  } else if (hi > length_) {
    v += (cum_.back() - volume_below(lo)) + volume_below(hi - length_);
  } else {
    v += volume_below(hi) - volume_below(lo);
  }
  out.volume = v;
  return out;
}

DistanceAndBalls distance_and_balls(const WarpedMetric& g, std::size_t a, std::size_t b) {
  if (a >= g.size() || b >= g.size()) throw ParameterError("axis point outside the grid");
  auto s = cumulative(g, g.phi, Parity::even);
  double d = std::abs(s[b] - s[a]);
  if (g.topology == Topology::periodic) d = std::min(d, s.back() - d);
  return DistanceAndBalls{d, AxisBalls(g, a)};
}

double neck_radius(const WarpedMetric& g) {
  const std::size_t m = g.size();
  double best = std::numeric_limits<double>::infinity();
  if (g.topology == Topology::periodic) {
    return *std::min_element(g.psi.begin(), g.psi.end());
  }
  for (std::size_t i = 1; i + 1 < m; ++i) {
    if (g.psi[i] <= g.psi[i - 1] && g.psi[i] <= g.psi[i + 1]) best = std::min(best, g.psi[i]);
  }
  return best;
}

}  // namespace riccilab
