#pragma once

#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace cadmm {

/// Fork-join pool for the per-iteration worker phase. Tasks are assigned to
/// threads by fixed stride, so the shard-to-thread mapping (and every
/// per-shard result) is independent of timing. With one thread everything
/// runs inline on the caller.
class ThreadPool {
 public:
  explicit ThreadPool(int threads) : requested_(threads < 1 ? 1 : threads) {
    for (int t = 1; t < requested_; ++t)
      workers_.emplace_back([this, t] { worker_loop(t); });
  }

  ~ThreadPool() {
    {
      std::unique_lock<std::mutex> lk(mutex_);
      stop_ = true;
      ++generation_;
    }
    cv_start_.notify_all();
    for (auto& w : workers_) w.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int threads() const { return requested_; }

  /// Run fn(i) for i in [0, count); blocks until all calls finish.
  void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    if (requested_ == 1 || count == 1) {
      for (std::size_t i = 0; i < count; ++i) fn(i);
      return;
    }
    {
      std::unique_lock<std::mutex> lk(mutex_);
      task_ = &fn;
      count_ = count;
      pending_ = static_cast<int>(workers_.size());
      ++generation_;
    }
    cv_start_.notify_all();
    run_slice(0);
    std::unique_lock<std::mutex> lk(mutex_);
    cv_done_.wait(lk, [this] { return pending_ == 0; });
    task_ = nullptr;
  }

 private:
  void run_slice(int slot) {
    for (std::size_t i = static_cast<std::size_t>(slot); i < count_;
         i += static_cast<std::size_t>(requested_))
      (*task_)(i);
  }

  void worker_loop(int slot) {
    std::size_t seen = 0;
    for (;;) {
      {
        std::unique_lock<std::mutex> lk(mutex_);
        cv_start_.wait(lk, [this, &seen] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
      }
      run_slice(slot);
      {
        std::unique_lock<std::mutex> lk(mutex_);
        if (--pending_ == 0) cv_done_.notify_one();
      }
    }
  }

  int requested_;
  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable cv_start_, cv_done_;
  const std::function<void(std::size_t)>* task_ = nullptr;
  std::size_t count_ = 0;
  std::size_t generation_ = 0;
  int pending_ = 0;
  bool stop_ = false;
};

} // namespace cadmm
