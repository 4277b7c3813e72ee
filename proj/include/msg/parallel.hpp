#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace msg {

// Worker count: hardware concurrency, capped by MSG_THREADS when set.
inline int worker_count() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("MSG_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1) n = std::min(n, cap);
    } catch (...) {
    }
  }
  return n;
}

// Runs fn(i) for i in [0, n) over contiguous chunks. fn must only write state
// owned by index i, so results do not depend on the thread count.
template <class Fn>
void parallel_for(long n, Fn&& fn) {
  const int workers = static_cast<int>(std::min<long>(worker_count(), n));
  if (workers <= 1 || n < 64) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const long chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const long begin = w * chunk;
    const long end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (long i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace msg
