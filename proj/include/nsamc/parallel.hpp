#pragma once

#include <cstddef>
#include <functional>

namespace nsamc {

/// Global thread budget shared by every data-parallel stage (and by Eigen's
/// GEMM). Defaults to 1; zero or less means the hardware concurrency.
void set_thread_count(int threads);
int thread_count();

/// Splits [0, n) into contiguous chunks, one per worker, and calls
/// `body(begin, end)` on each. Chunks never overlap, so per-index writes are
/// race-free and results do not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace nsamc
