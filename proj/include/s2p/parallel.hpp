#pragma once

#include <cstddef>
#include <functional>

namespace s2p {

// Runs fn(0..n-1) on up to `threads` workers. The first exception thrown by
// any task is rethrown after all workers stop.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace s2p
