#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace dco {

/// Fork-join helper for per-agent work. With one thread everything runs
/// inline; results are identical either way because tasks only touch their
/// own index.
class ThreadPool {
 public:
  explicit ThreadPool(int threads);
  ~ThreadPool();

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  /// Runs fn(i) for i in [begin, end). Rethrows the lowest-index exception.
  void parallel_for(int begin, int end, const std::function<void(int)>& fn);

  int size() const { return static_cast<int>(workers_.size()) + 1; }

  /// 0 = hardware concurrency, otherwise the request itself (min 1).
  static int resolve_threads(int requested);

 private:
  void worker_loop();

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  const std::function<void(int)>* task_ = nullptr;
  std::vector<std::exception_ptr>* errors_ = nullptr;
  std::atomic<int> next_{0};
  int begin_ = 0;
  int end_ = 0;
  std::atomic<int> pending_{0};
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

}  // namespace dco
