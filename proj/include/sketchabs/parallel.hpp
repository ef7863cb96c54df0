#pragma once

#include <cstddef>
#include <functional>

namespace sketchabs {

/// Worker count: SKETCHABS_THREADS if set (>= 1), else hardware concurrency.
unsigned thread_count();

/// Calls body(i) for i in [0, n) across up to thread_count() threads.
/// Callers write results into per-index slots and reduce afterwards in index
/// order, so results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace sketchabs
