#pragma once

#include <cstddef>
#include <functional>

namespace tcbsde {

/// Sets the worker-thread count used by scenario-parallel loops (default 1).
void set_worker_threads(int count);
int worker_threads();

// Runs fn(begin, end) over fixed-size index blocks. The partition depends only
// on `count`, never on the thread count, and every block writes to disjoint
// slots, so outputs are identical for any number of workers. Reductions must
// be done by the caller, serially, in block order.
void parallel_blocks(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn);

inline constexpr std::size_t kParallelBlockSize = 1024;

}  // namespace tcbsde
