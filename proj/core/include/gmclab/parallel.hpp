#pragma once

#include <cstddef>
#include <functional>

namespace gmclab {

/// Thread count from GMCLAB_THREADS, defaulting to 1.
std::size_t default_thread_count();

/// Splits [0, n) into contiguous chunks, one per worker. Each index is
/// visited exactly once; callers write results by index and reduce
/// afterwards in index order, so output does not depend on `threads`.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t begin, std::size_t end)>& body);

}  // namespace gmclab
