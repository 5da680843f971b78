#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <unistd.h>

#include "riccilab/flow.hpp"
#include "riccilab/flowstore.hpp"
#include "riccilab/geometry.hpp"

namespace testing {

using namespace riccilab;

inline constexpr double pi = std::numbers::pi;

inline double max_abs_dev(const std::vector<double>& v, double target) {
  double e = 0.0;
  for (double x : v) e = std::max(e, std::abs(x - target));
  return e;
}

inline FlowHistory sphere_flow(std::size_t m, double t_end, std::size_t store_every) {
  FlowOptions o;
  o.t_end = t_end;
  o.store_every = store_every;
  return run(build_round_sphere(3, 1.0, m), o);
}

inline FlowHistory static_history(const WarpedMetric& g, double t_end) {
  FlowHistory h;
  h.append(0.0, g);
  h.append(t_end, g);
  return h;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("riccilab-unit-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
