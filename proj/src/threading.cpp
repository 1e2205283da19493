#include "segan/threading.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace segan::threads {
namespace {

int initial_count() {
  if (const char* env = std::getenv("SEGAN_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  return static_cast<int>(hw > 16 ? 16 : hw);
}

class Pool {
 public:
  Pool() { resize(initial_count()); }
  ~Pool() { stop_workers(); }

  int size() const { return size_; }

  void resize(int n) {
    if (n < 1) n = 1;
    if (n == size_) return;
    stop_workers();
    size_ = n;
    stop_ = false;
    // size_ - 1 helper threads; the caller of run() is the last worker.
    for (int i = 0; i < size_ - 1; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  void run(int n, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    if (size_ == 1 || n == 1) {
      for (int i = 0; i < n; ++i) fn(i);
      return;
    }
    {
      std::unique_lock<std::mutex> lock(mu_);
      job_fn_ = &fn;
      job_n_ = n;
      next_.store(0, std::memory_order_relaxed);
      pending_ = n;
      error_ = nullptr;
      ++generation_;
    }
    cv_.notify_all();
    work(fn, n);
    std::unique_lock<std::mutex> lock(mu_);
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    job_fn_ = nullptr;
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void worker_loop() {
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* fn = nullptr;
      int n = 0;
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        fn = job_fn_;
        n = job_n_;
      }
      if (fn) work(*fn, n);
    }
  }

  void work(const std::function<void(int)>& fn, int n) {
    int finished = 0;
    for (;;) {
      int i = next_.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu_);
        if (!error_) error_ = std::current_exception();
      }
      ++finished;
    }
    if (finished > 0) {
      std::lock_guard<std::mutex> lock(mu_);
      pending_ -= finished;
      if (pending_ == 0) done_cv_.notify_all();
    } else {
      std::lock_guard<std::mutex> lock(mu_);
      if (pending_ == 0) done_cv_.notify_all();
    }
  }

  void stop_workers() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
    workers_.clear();
  }

  int size_ = 1;
  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int)>* job_fn_ = nullptr;
  int job_n_ = 0;
  std::atomic<int> next_{0};
  int pending_ = 0;
  uint64_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

Pool& pool() {
  static Pool p;
  return p;
}

}  // namespace

int count() { return pool().size(); }

void set_count(int n) { pool().resize(n); }

void parallel_for(int n, const std::function<void(int)>& fn) { pool().run(n, fn); }

}  // namespace segan::threads
