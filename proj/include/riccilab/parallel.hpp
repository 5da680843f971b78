#pragma once

#include <cstddef>
#include <functional>

namespace riccilab {

/// Worker count from RICCI_LAB_JOBS, else 1.
int default_jobs();

/// Runs body(i) for i in [0, count) on up to `jobs` threads. Each index is
/// handled exactly once; the first exception is rethrown after all workers stop.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body);

}  // namespace riccilab
