#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sysid {

inline unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// Calls fn(i) for i in [0, count) on up to `workers` threads. Work is handed
// out by index, so results stored by index do not depend on the schedule.
// The first exception thrown by any call is rethrown after all threads join.
template <class Fn>
void parallel_for(std::int64_t count, unsigned workers, Fn&& fn) {
  if (count <= 0) return;
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::min<std::int64_t>(count, 1024))));
  if (workers == 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::int64_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace sysid
