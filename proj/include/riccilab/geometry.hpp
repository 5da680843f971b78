#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "riccilab/stencil.hpp"

namespace riccilab {

/// Rotationally symmetric metric g = phi^2 dx^2 + psi^2 g_{S^{n-1}} sampled on a
/// uniform grid in x.
///
/// Sphere and ball grids include both endpoints of [0, 1]; periodic grids use
/// x_i = i/m and identify x = 1 with x = 0. Sphere topology has a smooth pole
/// at each end, ball topology has a pole at x = 0 and an open end at x = 1
/// (used for static flat model geometries).
struct WarpedMetric {
  int n = 3;
  Topology topology = Topology::sphere;
  std::vector<double> x;
  std::vector<double> phi;
  std::vector<double> psi;

  std::size_t size() const { return x.size(); }
  double spacing() const;
  bool is_pole(std::size_t i) const;
};

inline constexpr double kPoleTolerance = 1e-6;
inline constexpr double kPositivityFloor = 1e-10;

/// Throws ParameterError / ConstructionError when the invariants fail.
void validate(const WarpedMetric& g, double pole_tolerance = kPoleTolerance);

std::string to_string(Topology t);
Topology topology_from_string(const std::string& s);

/// Grid nodes for m points of the given topology.
std::vector<double> make_grid(Topology topology, std::size_t m);

WarpedMetric build_round_sphere(int n, double radius, std::size_t m);

/// Two round-ish bulbs of maximal warping radius `bump_radius` joined through a
/// neck of radius `neck_radius`:
///   psi = c sin(pi x) (1 - A sin^2(pi x)),  phi = c pi.
/// The profile is odd about both poles to all orders, so the poles are smooth.
WarpedMetric build_dumbbell(int n, double neck_radius, double bump_radius, std::size_t m);

/// Round cylinder S^1(length) x S^{n-1}(radius), periodic in x.
WarpedMetric build_cylinder(int n, double radius, double length, std::size_t m);

/// Flat Euclidean ball of the given outer radius (pole at x = 0).
WarpedMetric build_flat_ball(int n, double outer_radius, std::size_t m);

/// Metric with g -> c^2 g.
WarpedMetric scaled(const WarpedMetric& g, double c);

/// Sectional and Ricci curvatures of the warped product, per node.
struct CurvatureField {
  std::vector<double> K_rad;
  std::vector<double> K_sph;
  std::vector<double> Ric_rad;
  std::vector<double> Ric_sph;
  std::vector<double> R;

  /// max(|K_rad|, |K_sph|) per node; K_sph is ignored for n = 2.
  std::vector<double> rm_norm(int n) const;
};

enum class FieldRole { generic, potential, density, harnack, reduced_distance, distance, eigenfunction };

struct ScalarField {
  std::vector<double> values;
  FieldRole role = FieldRole::generic;
};

/// Volume of the unit k-sphere.
double unit_sphere_volume(int k);

/// Derived per-node quantities shared by all operators on one metric.
struct Geometry {
  int n = 3;
  Topology topology = Topology::sphere;
  double h = 0.0;
  std::vector<double> phi, psi, phi_x, psi_x;
  std::vector<double> psi_s, psi_ss;
  /// psi_s / psi; zero at poles (only ever multiplied by a vanishing f_s).
  std::vector<double> psi_s_over_psi;
  std::vector<char> pole;
  CurvatureField curvature;
  /// Finite-volume control volumes (include the unit-sphere factor).
  std::vector<double> cell_volume;
  /// Trapezoid weights of `integrate` (zero at poles). The integrand of a
  /// smooth symmetric field is even about the poles, so the rule converges
  /// spectrally on spheres and periodic grids.
  std::vector<double> quad_weight;
  /// Conductance of face i+1/2 between nodes i and i+1 (periodic: m faces,
  /// otherwise m-1).
  std::vector<double> face_conductance;

  std::size_t size() const { return phi.size(); }
};

struct FvWeights {
  std::vector<double> cell_volume;
  std::vector<double> face_conductance;
};

/// Only the finite-volume part of `analyze` (cheap; used inside time loops).
FvWeights fv_weights(const WarpedMetric& g);

/// Throws NearSingularError when interior psi drops below the positivity floor.
/// Without weights only the pointwise fields and curvature are filled in.
Geometry analyze(const WarpedMetric& g, bool with_weights = true);

CurvatureField curvature(const WarpedMetric& g);

/// Arclength derivatives, Laplacian and the spherical Hessian eigenvalue of a
/// rotationally symmetric function.
struct ScalarDerivatives {
  std::vector<double> ds;
  std::vector<double> dss;
  std::vector<double> laplacian;
  /// Hess f on unit spherical directions: (psi_s/psi) f_s (f_ss at poles).
  std::vector<double> hess_sph;
};

ScalarDerivatives differentiate(const Geometry& geo, std::span<const double> f);

/// Conservative second-order Laplacian (flux form on the control volumes).
std::vector<double> fv_laplacian(const Geometry& geo, std::span<const double> u);

/// Discrete Dirichlet energy sum_faces a (u_{i+1} - u_i)^2, i.e. int |grad u|^2 dV.
double fv_dirichlet_energy(const Geometry& geo, std::span<const double> u);

double integrate(const WarpedMetric& g, const ScalarField& field);
double integrate(const Geometry& geo, std::span<const double> values);
double total_volume(const Geometry& geo);

/// Cumulative arclength s(x_i) from x = 0 (fourth-order corrected trapezoid).
std::vector<double> arclength(const WarpedMetric& g);

/// Cumulative volume V(x_i) from x = 0.
std::vector<double> cumulative_volume(const WarpedMetric& g);

struct BallVolume {
  double volume = 0.0;
  bool clamped = false;
};

/// Volumes of the sets {y : |s(y) - s(x_a)| < r} around an axis node. For a pole
/// this is the metric ball B(x_a, r).
class AxisBalls {
 public:
  AxisBalls(const WarpedMetric& g, std::size_t center);
  BallVolume operator()(double r) const;
  double max_radius() const { return max_radius_; }

 private:
  double volume_below(double s) const;

  Topology topology_;
  std::vector<double> s_;
  std::vector<double> cum_;
  double s_center_ = 0.0;
  double length_ = 0.0;
  double max_radius_ = 0.0;
};

struct DistanceAndBalls {
  double distance = 0.0;
  AxisBalls balls;
};

DistanceAndBalls distance_and_balls(const WarpedMetric& g, std::size_t a, std::size_t b);

/// Interior neck radius: the smallest interior local minimum of psi (or the
/// global minimum for periodic metrics). Returns +inf when there is none.
double neck_radius(const WarpedMetric& g);

}  // namespace riccilab
