#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace irg {

// Runs fn(task_index) for task_index in [0, n_tasks) on `workers` threads.
// Each task must derive its own RNG stream from the task index and write only
// to its own output slot, so results are identical for any worker count.
inline void parallel_for_tasks(int n_tasks, int workers,
                               const std::function<void(int)>& fn) {
  if (n_tasks <= 0) return;
  if (workers < 1) workers = 1;
  if (workers == 1 || n_tasks == 1) {
    for (int i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto body = [&]() {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= n_tasks) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(error_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  int spawn = std::min(workers, n_tasks);
  pool.reserve(spawn);
  for (int w = 0; w < spawn; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace irg
