#pragma once

#include <cstddef>
#include <functional>

namespace ampsim::detail {

// Runs fn(begin, end) over a static partition of [0, n) on `threads` workers.
// Each range is disjoint, so callers get determinism by writing results into
// preallocated slots. The first exception thrown by any worker is rethrown
// after all workers join. threads <= 1 runs inline.
void parallel_chunks(std::size_t n, int threads,
                     const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace ampsim::detail
