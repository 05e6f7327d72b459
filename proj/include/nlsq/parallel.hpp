#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace nlsq {

/// Worker count from NLSQ_THREADS if set and positive, else the hardware
/// concurrency (at least 1).
int default_thread_count();

/// Calls body(i) for i in [0, count) on up to `threads` workers.  Indices are
/// claimed in increasing order; results written by index are therefore
/// independent of the worker count.  The first exception thrown by any call
/// is rethrown after all workers finish.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace nlsq
