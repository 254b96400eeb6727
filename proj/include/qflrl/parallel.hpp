#pragma once

#include <cstddef>
#include <functional>

namespace qflrl {

/// Number of worker threads to use: the explicit request if positive, else
/// the QFLRL_THREADS environment variable, else hardware concurrency.
std::size_t resolve_thread_count(std::size_t requested = 0);

/// Runs fn(i) for i in [0, n). Each index must write only to its own output
/// slot; results are then independent of the thread count, which keeps
/// batched runs byte-reproducible.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t n_threads = 0);

}  // namespace qflrl
