#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace sdhom {

inline int worker_count(int requested, Eigen::Index jobs) {
  const int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  return static_cast<int>(std::clamp<Eigen::Index>(n, 1, std::max<Eigen::Index>(jobs, 1)));
}

// Calls fn(i) for i in [0, n) on a pool of threads pulling indices in order.
// The first exception stops the remaining work and is rethrown.
template <class Fn>
void parallel_for(Eigen::Index n, int threads, Fn&& fn) {
  std::atomic<Eigen::Index> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    while (!stop.load()) {
      const Eigen::Index i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        stop = true;
      }
    }
  };
  const int workers = worker_count(threads, n);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace sdhom
