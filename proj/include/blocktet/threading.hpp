#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace blocktet {

/// Runs body(i) for i in [0, n) on up to `threads` workers, each owning a
/// contiguous index range. Callers guarantee distinct i touch disjoint state,
/// so results are independent of the worker count.
template <class F>
void parallel_for(int n, int threads, F&& body) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const int chunk = (n + threads - 1) / threads;
  for (int w = 0; w < threads; ++w) {
    const int lo = w * chunk;
    const int hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] {
      for (int i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace blocktet
