#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "riccilab/flowstore.hpp"
#include "riccilab/geometry.hpp"

namespace riccilab {

struct KappaOptions {
  /// Radii rho k / radii for k = 1..radii; the top radius stands in for the
  /// supremum over r < rho (Vol / r^n is continuous in r).
  int radii = 64;
  int jobs = 1;
};

struct KappaResult {
  /// +inf when no ball is admissible.
  double kappa = 0.0;
  bool admissible_found = false;
  std::size_t center = 0;
  double radius = 0.0;
  double volume = 0.0;
};

/// Minimum of Vol(B(x, r)) / r^n over axis nodes x and radii r < rho with
/// sup_B |Rm| <= r^{-2}, |Rm| = max(|K_rad|, |K_sph|). Away from the poles the
/// ball is the slab |s(y) - s(x)| < r, which contains it.
KappaResult kappa_scan(const WarpedMetric& g, double rho, const KappaOptions& opts = {});

struct CollapseReport {
  double scale = 0.0;
  std::vector<double> times;
  std::vector<double> kappa;
  double min_kappa = 0.0;
  /// min kappa stays above floor_ratio times the first value.
  bool bounded_away = false;
  double floor_ratio = 0.0;
  std::string note;
};

/// kappa(t) at scale sqrt(T - t_first) along every stored snapshot up to T.
CollapseReport collapse_detector(const FlowHistory& h, double T, double floor_ratio = 1e-3,
                                 const KappaOptions& opts = {});

struct NeckCenter {
  std::size_t node = 0;
  double x = 0.0;
  double closeness = 0.0;  // largest scaled deviation in the window
};

/// Nodes at which the metric, scaled by Q = R(x0), is eps-close over
/// {|s - s0|^2 < 1/(eps Q)} to the round cylinder of scalar curvature one.
/// Closeness: max of |psi - rbar|/rbar, |psi_s| and rbar |psi_ss| in the
/// scaled metric. Needs n >= 3.
std::vector<NeckCenter> neck_detect(const WarpedMetric& g, double eps);

struct DistanceLemmaReport {
  double t = 0.0;
  double r0 = 0.0;
  /// K with Ric <= (n - 1) K on the balls, measured from the metric.
  double K_measured = 0.0;
  /// False when a supplied K bound does not hold; then nothing is asserted.
  bool precondition_ok = true;
  /// min over nodes outside B(x0, r0) of (d_t - Delta d) + (n - 1)(2/3 K r0 + 1/r0).
  double min_slack_local = 0.0;
  std::size_t worst_node = 0;
  std::size_t checked = 0;
  /// Pole-pair part (sphere only): d/dt dist + 2 (n - 1)(2/3 K r0 + 1/r0).
  std::optional<double> pair_rate;
  std::optional<double> pair_slack;
};

/// Checks at time t with x0 the pole at x = 0. `K_bound` is an optional
/// user-supplied Ricci bound that gates the report.
DistanceLemmaReport distance_lemma_check(const FlowHistory& h, double t, double r0,
                                         std::optional<double> K_bound = std::nullopt);

/// Pole-pair check at the r0 that makes the bound tightest (scan over `count`
/// geometric values between r_lo and r_hi).
DistanceLemmaReport distance_lemma_best_pair(const FlowHistory& h, double t, double r_lo, double r_hi,
                                             int count = 64);

}  // namespace riccilab
