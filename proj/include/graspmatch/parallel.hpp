#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace graspmatch {

/// Runs fn(i) for i in [0, count) across up to `workers` threads (0 = hardware
/// concurrency). Work is split into fixed contiguous blocks, every invocation
/// writes only to its own index, and the call returns after all threads have
/// joined — so results are identical for any worker count and the call site
/// acts as an iteration barrier.
inline void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  std::size_t n_threads = workers > 0 ? static_cast<std::size_t>(workers)
                                      : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min(n_threads, count);
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  const std::size_t block = (count + n_threads - 1) / n_threads;
  for (std::size_t t = 0; t < n_threads; ++t) {
    const std::size_t begin = t * block;
    const std::size_t end = std::min(count, begin + block);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &fn] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (std::thread& th : pool) th.join();
}

}  // namespace graspmatch
