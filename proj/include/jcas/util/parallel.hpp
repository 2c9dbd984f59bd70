#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace jcas::parallel {

// Thread count used by every OpenMP region in the library. Defaults to 1 so
// runs are reproducible unless a caller opts in (the CLI's --jobs).
void set_num_threads(int n);
int num_threads();

// Runs f(0..n-1) on up to `jobs` threads. Used for share-nothing jobs (trials,
// seeds); results must be written to per-index slots. The first exception is
// rethrown after all threads finish.
template <typename F>
void for_each_job(std::size_t n, std::size_t jobs, F&& f) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < jobs; ++j)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace jcas::parallel
