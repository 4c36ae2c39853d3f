#include "solitonlab/common.hpp"

#include <algorithm>
#include <thread>
#include <vector>

namespace solitonlab {

int& worker_threads() {
  static int count = 1;
  return count;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const int threads = std::max(1, worker_threads());
  if (threads == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t blocks = std::min<std::size_t>(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = n * b / blocks;
    const std::size_t hi = n * (b + 1) / blocks;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace solitonlab
