#pragma once

#include <functional>

namespace vortlab {

/// Worker count: `requested` when positive, else VORTLAB_THREADS, else the
/// hardware concurrency.
int thread_count(int requested = 0);

/// Run fn(i) for i in [0, n) on up to `threads` workers, in contiguous chunks.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

} // namespace vortlab
