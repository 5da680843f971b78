#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "riccilab/flowstore.hpp"
#include "riccilab/lgeodesics.hpp"

namespace riccilab {

/// Which quantity a monitor follows and what is claimed about it.
enum class MonitorKind {
  lambda,     // nondecreasing; rate 2 int |Ric + Hess f|^2 e^{-f} at the minimizer
  lambdabar,  // nondecreasing while lambdabar <= 0, vacuous otherwise
  F,          // along the coupled flow; rate 2 int |Ric + Hess f|^2 e^{-f}
  W,          // along the coupled flow with tau = tau_terminal + t_last - t
  nu,         // nondecreasing
  vtilde,     // reduced volume, nonincreasing in tau
  minLbar,    // min (Lbar - 2 n tau), nonincreasing in tau
  minvu,      // min v/u, claimed nondecreasing in t
  maxvu,      // max v/u, nondecreasing in t
};

MonitorKind monitor_from_string(const std::string& s);
std::string to_string(MonitorKind k);

struct MonitorConfig {
  MonitorKind which = MonitorKind::lambda;
  /// Use every k-th snapshot.
  std::size_t every = 1;
  /// tol = c1 h^2 + c2 dt, h the largest arclength spacing, dt the local sample step.
  double c1 = 50.0;
  double c2 = 5.0;
  /// Allowed relative mismatch between observed rate and the rate formula.
  double match_rel = 0.02;
  /// W schedule and its terminal potential ("minimizer" or "constant").
  double tau_terminal = 0.25;
  std::string f_terminal = "minimizer";
  /// Reduced-volume monitors: base time (< 0 means t_last) and tau ladder.
  double t0 = -1.0;
  double tau_lo = 1e-3;
  double tau_hi = 0.0;  // 0: 0.9 (t0 - t_first)
  int tau_count = 20;
  LOptions lgeo;
  /// Harnack monitors: terminal time (< 0: t_last) and Gaussian width (0: default).
  double T = -1.0;
  double width = 0.0;
  /// Samples with T - t below this fraction of T - t_first are skipped
  /// (start-up of the Gaussian terminal data).
  double heat_window = 0.25;
  int jobs = 1;
};

struct MonitorViolation {
  double t = 0.0;
  double slack = 0.0;
  double relative = 0.0;  // slack / tol
};

/// Time series of one monitored quantity. For the tau-indexed monitors the
/// `t` column holds tau.
struct MonitorSeries {
  std::string name;
  std::vector<double> t;
  std::vector<double> value;
  std::vector<double> dvalue_dt;
  /// Rate formula where one exists, otherwise the bound 0.
  std::vector<double> predicted_rhs;
  /// observed - predicted.
  std::vector<double> slack;
  std::vector<double> tol;
  std::vector<std::string> verdict;  // holds | violated | vacuous
  std::vector<MonitorViolation> violations;
  std::string overall = "holds";
};

MonitorSeries record(const FlowHistory& h, const MonitorConfig& config);

/// Three-point differences on a nonuniform grid, one-sided at the ends.
std::vector<double> time_derivative(const std::vector<double>& t, const std::vector<double>& v);

/// Writes `t,value,dvalue_dt,predicted_rhs,slack,verdict`.
void write_monitor_csv(const MonitorSeries& s, const std::filesystem::path& path);

}  // namespace riccilab
