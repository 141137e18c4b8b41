#pragma once

// Static-partition execution layer.
//
// Every loop is split into kLogicalPartitions contiguous, balanced index
// ranges regardless of how many physical workers exist. Logical partitions are
// multiplexed onto workers round-robin, and reductions combine per-partition
// partials sequentially in ascending partition order. Floating-point results
// therefore do not depend on the worker count.
//
// Bodies must only write to locations owned by their own range. Overlapping
// writes are undefined behaviour. Nested calls from inside a body run inline.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <memory>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include "vibid/error.hpp"

namespace vibid {

inline constexpr std::size_t kLogicalPartitions = 8;

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool empty() const noexcept { return begin == end; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Slice `index` of `range_len` split into `parts` contiguous pieces whose
/// sizes differ by at most one (the larger pieces come first).
inline IndexRange partition_slice(std::size_t range_len, std::size_t parts, std::size_t index) noexcept {
  const std::size_t base = range_len / parts;
  const std::size_t extra = range_len % parts;
  const std::size_t begin = index * base + std::min(index, extra);
  return {begin, begin + base + (index < extra ? 1 : 0)};
}

inline std::vector<IndexRange> partition(std::size_t range_len, std::size_t workers) {
  if (workers == 0) throw Error(ErrorCode::InvalidArgument, "partition: workers must be >= 1");
  std::vector<IndexRange> out(workers);
  for (std::size_t w = 0; w < workers; ++w) out[w] = partition_slice(range_len, workers, w);
  return out;
}

namespace detail {

inline thread_local bool tl_inside_pool = false;

class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers) : workers_(workers) {
    threads_.reserve(workers_ - 1);
    for (std::size_t w = 1; w < workers_; ++w) threads_.emplace_back([this, w] { worker_loop(w); });
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    stop_.store(true, std::memory_order_release);
    generation_.fetch_add(1, std::memory_order_acq_rel);
    generation_.notify_all();
    for (auto& t : threads_) t.join();
  }

  std::size_t size() const noexcept { return workers_; }
  std::uint64_t barriers() const noexcept { return barriers_.load(std::memory_order_relaxed); }
  void reset_barriers() noexcept { barriers_.store(0, std::memory_order_relaxed); }

  using Invoke = void (*)(const void*, std::size_t);

  // Runs invoke(obj, t) for t in [0, tasks) and returns once all have finished.
  void run(std::size_t tasks, Invoke invoke, const void* obj) {
    barriers_.fetch_add(1, std::memory_order_relaxed);
    if (workers_ == 1 || tl_inside_pool) {
      for (std::size_t t = 0; t < tasks; ++t) invoke(obj, t);
      return;
    }
    std::lock_guard<std::mutex> guard(run_mutex_);
    tasks_ = tasks;
    invoke_ = invoke;
    obj_ = obj;
    error_ = nullptr;
    remaining_.store(static_cast<int>(workers_ - 1), std::memory_order_relaxed);
    generation_.fetch_add(1, std::memory_order_acq_rel);
    generation_.notify_all();

    execute_share(0);

    int left = remaining_.load(std::memory_order_acquire);
    while (left != 0) {
      remaining_.wait(left, std::memory_order_acquire);
      left = remaining_.load(std::memory_order_acquire);
    }
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void execute_share(std::size_t worker) {
    tl_inside_pool = true;
    for (std::size_t t = worker; t < tasks_; t += workers_) {
      try {
        invoke_(obj_, t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex_);
        if (!error_) error_ = std::current_exception();
      }
    }
    tl_inside_pool = false;
  }

  void worker_loop(std::size_t worker) {
    std::uint64_t seen = 0;
    for (;;) {
      generation_.wait(seen, std::memory_order_acquire);
      seen = generation_.load(std::memory_order_acquire);
      if (stop_.load(std::memory_order_acquire)) return;
      execute_share(worker);
      if (remaining_.fetch_sub(1, std::memory_order_acq_rel) == 1) remaining_.notify_one();
    }
  }

  std::size_t workers_;
  std::vector<std::thread> threads_;
  std::mutex run_mutex_;
  std::mutex error_mutex_;
  std::atomic<std::uint64_t> generation_{0};
  std::atomic<int> remaining_{0};
  std::atomic<bool> stop_{false};
  std::atomic<std::uint64_t> barriers_{0};
  std::size_t tasks_ = 0;
  Invoke invoke_ = nullptr;
  const void* obj_ = nullptr;
  std::exception_ptr error_;
};

}  // namespace detail

/// Handle to a pool of workers. Copies share the same pool.
class ExecContext {
 public:
  ExecContext() : ExecContext(1) {}

  explicit ExecContext(std::size_t worker_count) {
    if (worker_count == 0) throw Error(ErrorCode::InvalidArgument, "ExecContext: worker_count must be >= 1");
    requested_ = worker_count;
    pool_ = std::make_shared<detail::WorkerPool>(std::min(worker_count, kLogicalPartitions));
  }

  std::size_t worker_count() const noexcept { return requested_; }
  std::size_t physical_workers() const noexcept { return pool_->size(); }
  bool deterministic() const noexcept { return true; }

  /// Number of fork/join regions executed so far; each ends in a barrier.
  std::uint64_t barrier_count() const noexcept { return pool_->barriers(); }
  void reset_barrier_count() const noexcept { pool_->reset_barriers(); }

  template <class F>
  void run_partitions(const F& fn) const {
    pool_->run(
        kLogicalPartitions, [](const void* obj, std::size_t t) { (*static_cast<const F*>(obj))(t); }, &fn);
  }

 private:
  std::size_t requested_ = 1;
  std::shared_ptr<detail::WorkerPool> pool_;
};

inline const ExecContext& sequential_context() {
  static const ExecContext ctx(1);
  return ctx;
}

/// body(partition_index, IndexRange) for each logical partition of [0, range_len).
template <class Body>
void for_each_partition(const ExecContext& ctx, std::size_t range_len, const Body& body) {
  ctx.run_partitions([&](std::size_t part) {
    body(part, partition_slice(range_len, kLogicalPartitions, part));
  });
}

template <class Body>
void parallel_for(const ExecContext& ctx, std::size_t range_len, const Body& body) {
  for_each_partition(ctx, range_len, [&](std::size_t, IndexRange r) {
    if (!r.empty()) body(r);
  });
}

/// Per-partition map in parallel, then an ordered sequential combine:
/// combine(...combine(combine(identity, p0), p1)..., p7).
template <class V, class Map, class Combine>
V map_reduce(const ExecContext& ctx, std::size_t range_len, V identity, const Map& map, const Combine& combine) {
  std::array<V, kLogicalPartitions> partials;
  partials.fill(identity);
  for_each_partition(ctx, range_len, [&](std::size_t part, IndexRange r) {
    if (!r.empty()) partials[part] = map(r);
  });
  V acc = identity;
  for (const V& p : partials) acc = combine(acc, p);
  return acc;
}

/// Ordered combine of `width`-long partial vectors laid out partition-major.
template <class T>
void combine_partials(std::span<const T> partials, std::size_t width, std::span<T> out) {
  std::fill(out.begin(), out.end(), T{0});
  for (std::size_t p = 0; p < kLogicalPartitions; ++p) {
    const T* src = partials.data() + p * width;
    for (std::size_t j = 0; j < width; ++j) out[j] += src[j];
  }
}

}  // namespace vibid
