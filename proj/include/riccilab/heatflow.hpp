#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "riccilab/flowstore.hpp"
#include "riccilab/geometry.hpp"

namespace riccilab {

struct ConjugateOptions {
  /// Largest step in tau = T - t; 0 picks one from the arclength spacing.
  double dtau_max = 0.0;
};

/// Conjugate heat solution on the grid of the history (no regrid inside).
struct ConjugateSolution {
  double T = 0.0;
  /// Virtual age of the terminal data: the Gaussian of width^2 epsilon is the
  /// heat kernel after time epsilon, so kernel quantities use tau + epsilon.
  double epsilon = 0.0;
  std::vector<double> times;  // ascending, last one is T
  std::vector<std::vector<double>> u;
  std::vector<double> mass;  // int u dV at each time

  double tau_eff(std::size_t k) const { return T - times[k] + epsilon; }
};

/// Output times: every stored snapshot time before T, then T.
std::vector<double> default_output_times(const FlowHistory& h, double T);

/// Backward solve of -u_t - Delta u + R u = 0 from u(T) = u_T, advancing the
/// cell masses u V in tau with a conservative Crank-Nicolson scheme.
ConjugateSolution solve_conjugate_from(const FlowHistory& h, double T, std::vector<double> u_T,
                                       std::vector<double> output_times = {},
                                       const ConjugateOptions& opts = {});

/// Terminal data: a normalized Gaussian of width delta_width (in arclength)
/// around `center` (a node index, normally a pole). delta_width <= 0 selects
/// four grid spacings.
ConjugateSolution solve_conjugate(const FlowHistory& h, double T, double delta_width,
                                  std::size_t center = 0, std::vector<double> output_times = {},
                                  const ConjugateOptions& opts = {});

/// Forward heat equation h_t = Delta h from t0 (adjoint partner of the
/// conjugate solve, used for the pairing check).
std::vector<std::vector<double>> solve_forward_heat(const FlowHistory& h, std::vector<double> h0,
                                                    const std::vector<double>& times,
                                                    const ConjugateOptions& opts = {});

/// Nodes where u exceeds this fraction of max u take part in v/u statistics.
inline constexpr double kSupportThreshold = 1e-12;

/// f with u = (4 pi tau_eff)^{-n/2} e^{-f}; +inf where u is not positive.
std::vector<double> kernel_potential(const ConjugateSolution& sol, std::size_t k, int n);

struct HarnackField {
  double t = 0.0;
  std::vector<double> v;
  std::vector<double> v_over_u;  // NaN outside the support
  double max_v = 0.0;
  double min_v_over_u = 0.0;
  /// w = v/u obeys w_tau <= Delta w + 2 <grad log u, grad w>, so it is the
  /// maximum of v/u that is nondecreasing in t.
  double max_v_over_u = 0.0;
};

std::vector<HarnackField> harnack_v(const FlowHistory& h, const ConjugateSolution& sol);

/// Relative L2 residual of the identity box* v = -2 tau |Ric + Hess f - g/2tau|^2 u
/// at every interior output time (time derivative by centered differences).
struct HarnackResidual {
  std::vector<double> times;
  std::vector<double> relative;
  double max_relative = 0.0;
};

HarnackResidual harnack_residual(const FlowHistory& h, const ConjugateSolution& sol);

/// Axis curve x(t) in grid coordinates.
using AxisPath = std::function<double(double)>;

struct CurveSample {
  double t = 0.0;
  double lhs = 0.0;  // -d/dt f(gamma(t), t)
  double rhs = 0.0;  // (R + |gamma'|^2)/2 - f/(2 tau)
  double slack = 0.0;
};

struct CurveReport {
  std::vector<CurveSample> samples;
  std::vector<CurveSample> violations;
  double min_slack = 0.0;
};

CurveReport curve_harnack_check(const FlowHistory& h, const ConjugateSolution& sol,
                                const AxisPath& path, double tol);

/// Reduced distance on the grid of at(t), for tau_bar = T - t.
using ReducedDistanceAt = std::function<std::vector<double>(double t)>;

struct FvsLSample {
  double t = 0.0;
  double max_excess = 0.0;  // max over supported nodes of f - l
  std::size_t worst_node = 0;
};

struct FvsLReport {
  std::vector<FvsLSample> samples;
  std::vector<FvsLSample> violations;
  double max_excess = 0.0;
};

FvsLReport f_vs_l_check(const FlowHistory& h, const ConjugateSolution& sol,
                        const ReducedDistanceAt& l_at, const std::vector<double>& times, double tol);

}  // namespace riccilab
