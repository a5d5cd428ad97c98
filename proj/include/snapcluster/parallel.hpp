#pragma once

#include <cstddef>
#include <functional>

namespace snapcluster {

// Worker count: `requested` when > 0, otherwise SNAPCLUSTER_JOBS, otherwise 1.
int resolve_jobs(int requested);

// Runs fn(0) .. fn(count-1) on up to `jobs` threads. Each index runs exactly
// once; callers write results into per-index slots so the outcome does not
// depend on scheduling. The first exception (lowest index) is rethrown.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace snapcluster
