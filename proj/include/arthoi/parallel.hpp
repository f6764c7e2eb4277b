// Minimal deterministic parallel-for: static chunking, results written by
// index. Worker count is capped by the ARTHOI_THREADS environment variable.

#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace arthoi {

inline int worker_count() {
  int n = int(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  n = std::min(n, 8);
  if (const char* env = std::getenv("ARTHOI_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

/// Runs fn(i) for i in [0, n). Each index is processed exactly once; the
/// caller owns any output buffers, indexed so writes never race.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(worker_count(), std::max(n, 1));
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([=]() {
      for (int i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace arthoi
