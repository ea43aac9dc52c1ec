#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace randomlab {

// Runs fn(0..jobs-1) on `workers` threads. Job outputs must go to
// preallocated per-job slots; combined with per-job RNG streams this makes
// every caller bit-identical for any worker count, including workers=1.
inline void parallel_for(std::size_t jobs,
                         int workers,
                         const std::function<void(std::size_t)>& fn) {
  if (jobs == 0) return;
  if (workers < 1) workers = 1;
  const std::size_t nthreads =
      std::min<std::size_t>(static_cast<std::size_t>(workers), jobs);
  if (nthreads == 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace randomlab
