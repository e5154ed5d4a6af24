#pragma once

#include <cstddef>
#include <functional>

namespace survkit {

// Runs fn(i) for i in [0, n). Work unit i must write only to slot i of any
// shared output so results are identical for every thread count.
void parallel_for(std::size_t n, int n_threads, const std::function<void(std::size_t)>& fn);

}  // namespace survkit
