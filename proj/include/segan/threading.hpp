#pragma once

#include <functional>

namespace segan::threads {

// Worker count currently in use (>= 1). Initialized on first use from the
// SEGAN_THREADS environment variable, falling back to the hardware count.
// SEGAN_THREADS=1 is the serial reference mode.
int count();

// Resize the pool. n < 1 is clamped to 1. Not safe concurrently with
// parallel_for; intended for process startup and tests.
void set_count(int n);

// Runs fn(i) for i in [0, n). Work is handed out index-by-index, so results
// are identical for any worker count as long as each index writes only its
// own outputs. Rethrows the first exception raised by any index.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace segan::threads
