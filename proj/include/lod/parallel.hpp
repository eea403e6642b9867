#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace lod {

// Runs f(i) for i in [0, n) on a small thread pool.  Work items are handed
// out through an atomic counter; results must be written to disjoint,
// preallocated slots by the caller so the outcome is independent of
// scheduling.  The first exception (lowest index) is rethrown after all
// threads have joined.
template <typename F>
void parallel_for(int n, F&& f, unsigned num_threads = 0) {
  if (n <= 0) return;
  if (num_threads == 0) num_threads = std::thread::hardware_concurrency();
  if (num_threads == 0) num_threads = 1;
  num_threads = std::min<unsigned>(num_threads, static_cast<unsigned>(n));

  if (num_threads == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }

  std::atomic<int> next{0};
  std::mutex error_mutex;
  int first_error_index = n;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (i < first_error_index) {
          first_error_index = i;
          first_error = std::current_exception();
        }
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(num_threads);
  for (unsigned t = 0; t < num_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace lod
