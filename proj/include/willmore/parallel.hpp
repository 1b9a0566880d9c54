#pragma once

#include <cstddef>
#include <functional>

namespace willmore {

/// Worker count from WILLMORE_THREADS, else the hardware concurrency.
int thread_count();

/// Calls fn(i) for i in [0, n) over contiguous static blocks. Callers write
/// results by index, so output does not depend on the thread count. The first
/// exception (lowest block) is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads = 0);

} // namespace willmore
