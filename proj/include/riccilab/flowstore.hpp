#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "riccilab/geometry.hpp"

namespace riccilab {

/// Snapshot `first_snapshot` is the first one on a new uniform-arclength grid;
/// the snapshot before it is the pre-regrid state at `time`.
struct RegridEvent {
  double time = 0.0;
  std::size_t first_snapshot = 0;
};

/// How a flow run ended.
struct Termination {
  std::string status = "ok";  // ok | near_singular | max_steps | failed
  double t_final = 0.0;
  std::string reason;
  std::size_t steps = 0;
};

/// Resample onto a grid that is uniform in arclength (same m). For sphere
/// topology the poles stay at the ends.
WarpedMetric regrid_uniform_arclength(const WarpedMetric& g);

class FlowHistory {
 public:
  FlowHistory() = default;

  /// Appends a snapshot; times must increase strictly. `new_epoch` marks a
  /// regrid between the previous snapshot and this one.
  void append(double time, WarpedMetric g, bool new_epoch = false);

  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }
  int n() const;
  Topology topology() const;
  const std::vector<double>& times() const { return times_; }
  const WarpedMetric& snapshot(std::size_t k) const { return metrics_.at(k); }
  const std::vector<RegridEvent>& regrid_events() const { return regrid_events_; }
  int epoch(std::size_t k) const;
  double t_first() const { return times_.front(); }
  double t_last() const { return times_.back(); }

  /// Metric at time t, piecewise linear in (phi^2, psi^2); bit-exact at
  /// snapshot times. Throws RangeError outside [t_first, t_last].
  WarpedMetric at(double t) const;

  /// True when a regrid happens inside the open interval (t0, t1].
  bool has_regrid_in(double t0, double t1) const;

  /// Copy restricted to snapshots with time <= t_max.
  FlowHistory truncated(double t_max) const;

  std::optional<Termination> termination;

 private:
  std::vector<double> times_;
  std::vector<WarpedMetric> metrics_;
  std::vector<RegridEvent> regrid_events_;
};

/// Writes manifest.json and snap-NNNNNN.csv files (plus sidecars).
void save_history(const FlowHistory& h, const std::filesystem::path& dir);

/// Unknown manifest keys are tolerated and reported through `warnings`.
FlowHistory load_history(const std::filesystem::path& dir,
                         std::vector<std::string>* warnings = nullptr);

}  // namespace riccilab
