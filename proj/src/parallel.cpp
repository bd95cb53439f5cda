#include "nsamc/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace nsamc {

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int threads) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  g_threads = std::max(1, threads);
  Eigen::setNbThreads(g_threads);
}

int thread_count() { return g_threads; }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  const auto workers = static_cast<std::size_t>(std::max(1, g_threads.load()));
  if (workers == 1 || n < 2 * workers) {
    if (n > 0) body(0, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(0, std::min(n, chunk));
}

}  // namespace nsamc
