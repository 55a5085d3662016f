#include "dco/parallel.hpp"

#include <algorithm>

namespace dco {

int ThreadPool::resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

ThreadPool::ThreadPool(int threads) {
  const int n = std::max(1, threads);
  workers_.reserve(static_cast<std::size_t>(n - 1));
  for (int i = 0; i < n - 1; ++i) workers_.emplace_back([this] { worker_loop(); });
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    stop_ = true;
    ++generation_;
  }
  start_cv_.notify_all();
  for (auto& w : workers_) w.join();
}

void ThreadPool::worker_loop() {
  std::uint64_t seen = 0;
  for (;;) {
    const std::function<void(int)>* task;
    std::vector<std::exception_ptr>* errors;
    int begin;
    {
      std::unique_lock<std::mutex> lock(mutex_);
      start_cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      task = task_;
      errors = errors_;
      begin = begin_;
    }
    for (;;) {
      const int i = next_.fetch_add(1, std::memory_order_relaxed);
      if (i >= end_) break;
      try {
        (*task)(i);
      } catch (...) {
        (*errors)[static_cast<std::size_t>(i - begin)] = std::current_exception();
      }
    }
    if (pending_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
      std::lock_guard<std::mutex> lock(mutex_);
      done_cv_.notify_all();
    }
  }
}

void ThreadPool::parallel_for(int begin, int end, const std::function<void(int)>& fn) {
  if (end <= begin) return;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(end - begin));

  if (workers_.empty()) {
    for (int i = begin; i < end; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i - begin)] = std::current_exception();
      }
    }
  } else {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      task_ = &fn;
      errors_ = &errors;
      begin_ = begin;
      end_ = end;
      next_.store(begin, std::memory_order_relaxed);
      pending_.store(static_cast<int>(workers_.size()) + 1, std::memory_order_relaxed);
      ++generation_;
    }
    start_cv_.notify_all();
    // This thread participates too.
    for (;;) {
      const int i = next_.fetch_add(1, std::memory_order_relaxed);
      if (i >= end) break;
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i - begin)] = std::current_exception();
      }
    }
    if (pending_.fetch_sub(1, std::memory_order_acq_rel) != 1) {
      std::unique_lock<std::mutex> lock(mutex_);
      done_cv_.wait(lock, [&] { return pending_.load(std::memory_order_acquire) == 0; });
    }
  }

  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace dco
