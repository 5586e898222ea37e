#pragma once

#include <cstddef>
#include <functional>

namespace brillouin {

// Runs fn(i) for i in [0, n) on up to `jobs` threads (jobs <= 1 runs inline).
// Each index is visited once; the first exception thrown by any call is
// rethrown after all threads finish.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace brillouin
