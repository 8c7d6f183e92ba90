#pragma once

#include <cstddef>
#include <functional>

namespace esa {

// Worker count: ESA_THREADS if set to a positive integer, otherwise the
// hardware concurrency.
std::size_t thread_count();

// Runs body(0..n-1) across worker threads. Each index must write only to its
// own output slot; results are then independent of the thread count. The first
// exception thrown by any body is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace esa
