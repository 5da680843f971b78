#pragma once

#include <cstddef>
#include <vector>

#include "riccilab/flowstore.hpp"
#include "riccilab/geometry.hpp"

namespace riccilab {

/// Settings shared by shooting, reduced-distance fields and the identity suite.
struct LOptions {
  /// Log-spaced |v0| values in the fan (v0 = 0 is always added).
  int fan_size = 256;
  /// vmax / vmin of the fan.
  double v_ratio = 1e4;
  /// Largest |v0|; 0 picks 1.5 diam / (2 sqrt(smallest tau_bar)).
  double v_max = 0.0;
  /// RK4 steps in sigma = 2 sqrt(tau) over the whole range.
  int ode_steps = 800;
  /// Minimum covered volume fraction for a reduced volume to count.
  double coverage_threshold = 0.99;
  int jobs = 1;
};

struct LSample {
  double tau = 0.0;
  double x = 0.0;  // grid coordinate; beyond 1 on a sphere means past the antipode
  double X = 0.0;  // ds/dtau (arclength velocity)
  double R = 0.0;
  double L = 0.0;
  double K = 0.0;  // int_0^tau tau^{3/2} H(X) dtau, H evaluated term by term
  double H = 0.0;
  double log_jacobian = 0.0;
  double dlogJ_dtau = 0.0;
  /// d x / d v0 and d x' / d v0 (variational pair, ' = d/dsigma).
  double x_v = 0.0;
  double phi = 0.0;
  double psi_over_v = 0.0;
};

/// Radial L-geodesic from the pole x = 0 of the metric at time t0, with
/// tau = t0 - t and sqrt(tau) X -> v0 as tau -> 0.
struct LPath {
  double v0 = 0.0;
  double t0 = 0.0;
  std::vector<LSample> samples;
  /// Left the grid (ball) or passed the antipodal pole (sphere).
  bool truncated = false;
};

/// Integrates one L-geodesic up to tau_max, sampling at every ODE step.
/// Throws ParameterError for periodic topology (no pole to start from) and
/// when the window [t0 - tau_max, t0] holds a regrid.
LPath shoot(const FlowHistory& h, double t0, double v0, double tau_max, const LOptions& opts = {});

struct ReducedField {
  double tau_bar = 0.0;
  WarpedMetric g;  // metric at t0 - tau_bar
  std::vector<double> L;
  std::vector<double> l;
  std::vector<double> Lbar;
  std::vector<double> K;
  std::vector<char> covered;
  /// Nodes reached by more than one branch of the fan (barrier-sense set).
  std::vector<char> kink;
  double coverage = 0.0;  // covered volume fraction
  double min_l = 0.0;
};

/// Reduced distance at several tau_bar from one shooting fan; also returns the
/// reduced volume by transport along the fan for each tau_bar.
struct LFan {
  double t0 = 0.0;
  std::vector<double> taus;
  std::vector<ReducedField> fields;
  std::vector<double> vtilde_transport;
  std::vector<LPath> paths;
};

LFan shoot_fan(const FlowHistory& h, double t0, std::vector<double> taus, const LOptions& opts = {});

ReducedField reduced_distance_field(const FlowHistory& h, double t0, double tau_bar,
                                   const LOptions& opts = {});

struct ReducedVolume {
  double value = 0.0;
  double coverage = 0.0;
  /// Coverage below the threshold; the value then misses part of the manifold.
  bool flagged = false;
};

/// int tau^{-n/2} e^{-l} dV over the covered nodes of the metric at t0 - tau.
ReducedVolume reduced_volume(const ReducedField& field, const WarpedMetric& g_at_tau,
                             double coverage_threshold = 0.99);

struct JacobianSample {
  double tau = 0.0;
  double dlogJ_dtau = 0.0;
  double bound = 0.0;  // n/(2 tau) - tau^{-3/2} K / 2
  double slack = 0.0;  // bound - dlogJ_dtau
  double monotone_quantity = 0.0;  // -n/2 log tau - l + log J
};

struct JacobianReport {
  std::vector<JacobianSample> samples;
  std::vector<JacobianSample> violations;
  double min_slack = 0.0;
  /// Largest increase of the monotone quantity between consecutive samples.
  double max_increase = 0.0;
};

JacobianReport jacobian_transport(const LPath& path, int n, double tol);

/// Relative error of tau^{3/2}(R + |X|^2) = -K + L/2 at each sample.
std::vector<double> energy_identity_errors(const LPath& path);

struct IdentityLevel {
  double tau_bar = 0.0;
  double res_Ltau = 0.0;  // relative max residual of L_tau identity
  double res_gradL = 0.0;  // relative max residual of |grad L|^2 identity
  double slack_lapL = 0.0;
  double slack_l_heat = 0.0;
  double slack_l_elliptic = 0.0;
  double slack_Lbar = 0.0;
  /// Integrated (distributional) forms of the two l-inequalities.
  double weak_l_heat = 0.0;
  double weak_l_elliptic = 0.0;
  double min_l = 0.0;
  double min_Lbar_minus_2n_tau = 0.0;
  std::size_t excluded = 0;
  std::size_t checked = 0;
};

struct IdentityReport {
  std::vector<IdentityLevel> levels;
  double max_res_Ltau = 0.0;
  double max_res_gradL = 0.0;
  double min_slack = 0.0;  // over all four inequalities (normalized)
  double min_weak = 0.0;
  double max_harnack_gap = 0.0;
};

/// Residuals and slacks at each tau_bar, using a geometric ladder tau/r, tau,
/// tau r for the tau derivatives. Slacks are normalized by the size of the
/// terms; nodes near uncovered or multiply covered points are excluded.
IdentityReport identity_suite(const FlowHistory& h, double t0, const std::vector<double>& taus,
                              double ladder_ratio = 1.1, const LOptions& opts = {});

/// Geometric ladder of `count` values from lo to hi.
std::vector<double> geometric_ladder(double lo, double hi, int count);

}  // namespace riccilab
