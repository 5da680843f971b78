#pragma once

#include <optional>
#include <vector>

#include "riccilab/geometry.hpp"

namespace riccilab {

struct EntropyReport {
  double value = 0.0;
  std::optional<ScalarField> minimizer;
  double tau = 0.0;
  /// |int (4 pi tau)^{-n/2} e^{-f} dV - 1| (tau-free form for F and lambda).
  double constraint_residual = 0.0;
  /// Final residual of the eigen / Euler-Lagrange equation when a solver ran.
  double solver_residual = 0.0;
  int iterations = 0;
};

/// F = int (R + |grad f|^2) e^{-f} dV.
double eval_F(const WarpedMetric& g, const ScalarField& f);

/// Symmetric 2-tensor perturbation in the orthonormal frame:
/// v_rad = v(e_s, e_s), v_sph = v on a unit spherical direction.
struct MetricVariation {
  std::vector<double> v_rad;
  std::vector<double> v_sph;
};

/// Variation induced by (phi, psi) -> (phi + d_phi, psi + d_psi).
MetricVariation variation_from_profiles(const WarpedMetric& g, const std::vector<double>& d_phi,
                                        const std::vector<double>& d_psi);

/// int e^{-f} [ -v_ij (R_ij + f_ij) + (v/2 - h)(2 Delta f - |grad f|^2 + R) ] dV.
double first_variation_F(const WarpedMetric& g, const ScalarField& f, const MetricVariation& v,
                         const std::vector<double>& h);

/// Lowest eigenvalue of -4 Delta + R on rotationally symmetric functions,
/// minimizer f = -2 log(ground state) with int e^{-f} dV = 1.
EntropyReport lambda(const WarpedMetric& g);

/// lambda V^{2/n}.
double lambda_bar(const WarpedMetric& g);

/// W = int [tau (|grad f|^2 + R) + f - n] (4 pi tau)^{-n/2} e^{-f} dV.
EntropyReport eval_W(const WarpedMetric& g, const ScalarField& f, double tau);

struct MuOptions {
  double tolerance = 1e-6;
  int max_gradient_iterations = 400;
  int max_newton_iterations = 60;
};

/// Minimum of W at fixed tau over the constraint set.
EntropyReport mu(const WarpedMetric& g, double tau, const MuOptions& opts = {});

struct NuResult {
  double value = 0.0;
  double tau = 0.0;
  /// The minimum sat on the edge of the search bracket.
  bool at_bracket_edge = false;
  std::vector<double> scan_tau;
  std::vector<double> scan_mu;
};

struct NuOptions {
  double lo_factor = 1e-3;  // times diam^2
  double hi_factor = 1e2;
  int scan_points = 64;
  double log_tau_tolerance = 1e-4;
  MuOptions mu;
  int jobs = 1;
};

NuResult nu(const WarpedMetric& g, const NuOptions& opts = {});

struct Thermo {
  double logZ = 0.0;
  double E_avg = 0.0;
  double S = 0.0;
  double sigma = 0.0;
  double mass = 0.0;
};

/// Statistical quantities for dm = (4 pi tau)^{-n/2} e^{-f} dV.
Thermo thermo(const WarpedMetric& g, const ScalarField& f, double tau);

/// Integrand pieces shared by W, thermo and the monotonicity right-hand sides.
struct PotentialTerms {
  Geometry geo;
  ScalarDerivatives df;
  std::vector<double> weight;  // (4 pi tau)^{-n/2} e^{-f} (tau <= 0: e^{-f})
};

PotentialTerms potential_terms(const WarpedMetric& g, const ScalarField& f, double tau);

/// 2 int |Ric + Hess f|^2 e^{-f} dV.
double F_rate(const WarpedMetric& g, const ScalarField& f);

/// int 2 tau |Ric + Hess f - g/2tau|^2 (4 pi tau)^{-n/2} e^{-f} dV.
double W_rate(const WarpedMetric& g, const ScalarField& f, double tau);

}  // namespace riccilab
