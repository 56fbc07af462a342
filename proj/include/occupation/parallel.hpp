#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace occupation {

/// Runs fn(task) for task = 0..n_tasks-1 on up to `workers` threads and
/// returns the results in task order, so reductions over them do not depend
/// on scheduling. The first exception thrown by any task is rethrown.
template <class Fn>
auto run_tasks(std::size_t n_tasks, unsigned workers, Fn fn) {
  using R = decltype(fn(std::size_t{0}));
  std::vector<R> results(n_tasks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t t = next++; t < n_tasks; t = next++) {
      try {
        results[t] = fn(t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) {
          error = std::current_exception();
        }
        next = n_tasks;
      }
    }
  };
  const unsigned n_threads =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), n_tasks));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned i = 0; i < n_threads; ++i) {
      pool.emplace_back(worker);
    }
    for (auto& th : pool) {
      th.join();
    }
  }
  if (error) {
    std::rethrow_exception(error);
  }
  return results;
}

/// Half-open index range of task t when n items are split over n_tasks.
inline std::pair<std::size_t, std::size_t> task_range(std::size_t n, std::size_t n_tasks,
                                                      std::size_t t) {
  return {n * t / n_tasks, n * (t + 1) / n_tasks};
}

}  // namespace occupation
