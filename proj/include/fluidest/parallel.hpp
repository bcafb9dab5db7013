#pragma once

#include <functional>

namespace fluidest {

/// Worker count: FLUIDEST_THREADS if set and positive, otherwise hardware concurrency.
int worker_count();

/// Override the worker count for this process (0 restores the default policy).
void set_worker_count(int n);

/// Runs body(i) for i in [begin, end) across workers. Each index is handled by
/// exactly one call, so results written per index are deterministic regardless
/// of scheduling. Exceptions from the body are rethrown on the calling thread.
/// Calls made from inside a body run serially.
void parallel_for(int begin, int end, const std::function<void(int)>& body);

}  // namespace fluidest
