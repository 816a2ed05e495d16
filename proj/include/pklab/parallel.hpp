#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

namespace pklab {

// Resolve a requested thread count: 0 means hardware concurrency.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

// Static range split. Each index is processed exactly once and results must
// be written to per-index slots, so the outcome is independent of the number
// of threads and of scheduling.
template <typename Fn>
void parallel_for(std::int64_t begin, std::int64_t end, int threads, Fn&& fn) {
  std::int64_t count = end - begin;
  if (count <= 0) return;
  int t = std::max(1, threads);
  if (t == 1 || count == 1) {
    for (std::int64_t i = begin; i < end; ++i) fn(i);
    return;
  }
  t = int(std::min<std::int64_t>(t, count));
  std::vector<std::thread> pool;
  pool.reserve(t);
  std::int64_t chunk = (count + t - 1) / t;
  for (int w = 0; w < t; ++w) {
    std::int64_t lo = begin + w * chunk;
    std::int64_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace pklab
