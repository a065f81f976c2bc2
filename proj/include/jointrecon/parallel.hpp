#pragma once

#include <cstddef>
#include <functional>

namespace jointrecon {

/// Effective worker count: `requested` (<= 0 means 1), capped by the
/// JOINTRECON_THREADS environment variable when it is set.
int worker_count(int requested);

/// Runs fn(0..n-1) on up to `jobs` threads. Work is statically partitioned
/// and each index writes its own output slot, so results do not depend on
/// the thread count. The first exception thrown is rethrown on the caller.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace jointrecon
