#pragma once

#include <cstddef>
#include <functional>

namespace debris {

// Calls fn(i) for every i in [0, n) on up to `workers` threads. Each index
// runs exactly once; if any call throws, the exception of the lowest failing
// index is rethrown after all threads finish.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace debris
