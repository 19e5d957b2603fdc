#pragma once

#include <cstddef>
#include <functional>

namespace audit {

/// Thread count from the AUDIT_THREADS environment variable, falling back to
/// the hardware concurrency (at least 1).
unsigned default_thread_count();

/// Runs fn(i) for i in [0, n) on up to `threads` worker threads.
///
/// Work items are claimed dynamically, so fn must write only to slots owned
/// by its index.  The first exception thrown by any item is rethrown after
/// all workers have joined.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace audit
