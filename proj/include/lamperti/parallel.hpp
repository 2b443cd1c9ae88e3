#ifndef LAMPERTI_PARALLEL_HPP_
#define LAMPERTI_PARALLEL_HPP_

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lamperti {

/*
 * Runs fn(i) for i in [0, n) on a pool of threads. Work items are claimed
 * through an atomic counter; fn must write its result to slot i only, so the
 * outcome does not depend on the thread count. The first exception thrown by
 * any item is rethrown after all threads join.
 */
template <typename Fn>
void parallel_for(std::int64_t n, Fn &&fn, unsigned threads = 0) {
  if (threads == 0) {
    threads = std::max(1u, std::thread::hardware_concurrency());
  }
  threads = static_cast<unsigned>(std::min<std::int64_t>(threads, std::max<std::int64_t>(n, 1)));
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) {
        return;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) {
          error = std::current_exception();
        }
        next.store(n);
        return;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back(worker);
    }
    for (auto &th : pool) {
      th.join();
    }
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

} // namespace lamperti

#endif /* LAMPERTI_PARALLEL_HPP_ */
