#pragma once
// Static chunked parallelism. Work splits into contiguous index ranges, one
// per worker; callers reduce per-worker results in worker order so a run is
// reproducible for a fixed thread count (pin with ADSPOI_THREADS).

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace adspoi {

inline int env_threads() {
  if (const char* env = std::getenv("ADSPOI_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 4u));
}

// fn(worker_index, begin, end) over [0, n) split into `workers` chunks.
template <typename F>
void parallel_chunks(int n, int workers, F&& fn) {
  workers = std::max(1, std::min(workers, n));
  if (workers <= 1) {
    if (n > 0) fn(0, 0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  int base = n / workers, rem = n % workers, begin = 0;
  for (int w = 0; w < workers; ++w) {
    int len = base + (w < rem ? 1 : 0);
    int end = begin + len;
    pool.emplace_back([&fn, w, begin, end] { fn(w, begin, end); });
    begin = end;
  }
  for (auto& t : pool) t.join();
}

}  // namespace adspoi
