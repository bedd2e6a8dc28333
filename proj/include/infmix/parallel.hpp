#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace infmix {

// Global worker count: explicit setting, else INFMIX_THREADS, else hardware concurrency.
inline int& thread_setting() {
  static int n = 0;
  return n;
}

inline void set_thread_count(int n) { thread_setting() = std::max(0, n); }

inline int thread_count() {
  if (thread_setting() > 0) return thread_setting();
  if (const char* e = std::getenv("INFMIX_THREADS")) {
    int n = std::atoi(e);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs body(i) for i in [0, n). Work items are independent; callers merge results by index so the
// outcome does not depend on scheduling.
template <class F>
void parallel_for(int n, F&& body) {
  const int workers = std::min(n, thread_count());
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex m;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i; (i = next++) < n;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lk(m);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace infmix
