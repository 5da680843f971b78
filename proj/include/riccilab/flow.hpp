#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "riccilab/flowstore.hpp"
#include "riccilab/geometry.hpp"

namespace riccilab {

struct FlowOptions {
  double cfl = 0.5;
  double t_end = 1.0;
  std::size_t max_steps = 5'000'000;
  double regrid_threshold = 10.0;
  std::size_t store_every = 10;
  int max_halvings = 30;
  /// Stop when interior min psi falls below this fraction of its initial value.
  double psi_collapse_ratio = 1e-4;
  double curvature_cap = 1e8;
};

void check_options(const FlowOptions& opts);

/// Time derivatives of (phi, psi) under the reduced Ricci flow.
struct FlowRate {
  std::vector<double> phi_t;
  std::vector<double> psi_t;
};

FlowRate flow_rate(const WarpedMetric& g);

/// Parabolic step limit on the arclength spacing.
double stable_dt(const WarpedMetric& g, double cfl);

/// One Heun (RK2) step. dt = 0 returns the input unchanged. Throws
/// NearSingularError when psi leaves the positive range and NumericError on
/// non-finite values.
WarpedMetric ricci_step(const WarpedMetric& g, double dt);

/// Adaptive time loop; the outcome is recorded in `termination`, step errors
/// never escape. Ball topology is rejected with ParameterError.
FlowHistory run(const WarpedMetric& g0, const FlowOptions& opts);

/// Largest over smallest cell arclength.
double spacing_ratio(const WarpedMetric& g);

/// Potential f along a stored flow, determined by its value at the last
/// snapshot and the coupled equation f_t = -Delta f + |grad f|^2 - R (+ n/2tau
/// when `tau_terminal` attaches the schedule tau(t) = tau_terminal + t_last - t).
///
/// The equation is a backward heat equation in t, so it is solved from the
/// final time towards the initial one through u = (4 pi tau)^{-n/2} e^{-f},
/// which obeys the conjugate heat equation. One field per stored snapshot.
std::vector<ScalarField> evolve_potential(const FlowHistory& h, const ScalarField& f_terminal,
                                          std::optional<double> tau_terminal = std::nullopt);

}  // namespace riccilab
