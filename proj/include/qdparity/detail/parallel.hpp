#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qdparity::dynamics {

template <class Result, class Job>
std::vector<Result> parallel_map(int count, Job job) {
  std::vector<Result> out(static_cast<std::size_t>(std::max(count, 0)));
  if (count <= 0) return out;
  const int workers = std::clamp(static_cast<int>(std::thread::hardware_concurrency()), 1, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) out[i] = job(i);
    return out;
  }

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        out[i] = job(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace qdparity::dynamics
