#pragma once

#include <cstddef>
#include <functional>

namespace photon_census {

// Worker count: `requested` if nonzero, else hardware concurrency, capped by
// the PHOTON_CENSUS_THREADS environment variable when set.
unsigned worker_count(unsigned requested = 0);

// Calls body(i) for i in [0, n) on up to `workers` threads. Each index is
// visited exactly once; callers write results by index. The first exception
// thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& body);

}  // namespace photon_census
