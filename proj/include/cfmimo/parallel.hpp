#pragma once

#include <cstddef>
#include <functional>

namespace cfmimo {

/// Worker count: CFMIMO_THREADS if set and positive, else hardware concurrency.
unsigned worker_count();

/// Runs body(i) for i in [0, count) on up to `workers` threads. Tasks are
/// handed out dynamically; callers write results into slot i so the outcome
/// never depends on scheduling. The first exception thrown by a task is
/// rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  unsigned workers = worker_count());

} // namespace cfmimo
