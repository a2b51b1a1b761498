#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace qdmd {

// Static range split over worker threads. Chunk boundaries depend only on
// (n, n_threads), so results of independent per-index work are identical for
// any thread count.
inline void parallel_for(std::size_t n, int n_threads,
                         const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  std::size_t workers = n_threads > 0 ? static_cast<std::size_t>(n_threads) : 1;
  workers = std::min(workers, n);
  if (workers <= 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace qdmd
