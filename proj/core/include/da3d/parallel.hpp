#pragma once

#include <cstddef>
#include <functional>

namespace da3d {

// Worker cap: DA3D_THREADS if set and positive, else hardware concurrency.
int worker_count();

// Runs fn(i) for i in [0, n) over at most worker_count() threads. Each index
// runs exactly once; callers write results to per-index slots so that the
// outcome does not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace da3d
