#pragma once

// Bounded FIFO channels connecting the farm activities.
//
// SpscQueue is the emitter -> worker link: a lock-free ring with one producer
// and one consumer that blocks (futex wait through std::atomic::wait) when
// full or empty instead of spinning. Blocking matters: the farm usually runs
// more activities than cores and a spinning queue would steal cycles from the
// workers it feeds.
//
// Channel is a mutex/condition-variable FIFO used where several producers
// share one consumer (workers -> collector) or where the capacity is
// unbounded (feedback mailboxes).

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <new>
#include <optional>
#include <stdexcept>
#include <utility>

namespace statefarm {

inline constexpr std::size_t kDefaultQueueCapacity = 512;

template <class T>
class SpscQueue {
 public:
  explicit SpscQueue(std::size_t capacity)
      : capacity_(capacity), slots_(std::make_unique<std::optional<T>[]>(capacity)) {
    if (capacity == 0) throw std::invalid_argument("SpscQueue capacity must be >= 1");
  }

  SpscQueue(const SpscQueue&) = delete;
  SpscQueue& operator=(const SpscQueue&) = delete;

  /// Blocks while the ring is full. Returns false once the queue is closed.
  bool push(T value) {
    for (;;) {
      const auto tail = tail_.load(std::memory_order_relaxed);
      if (tail - head_.load(std::memory_order_acquire) < capacity_) {
        if (closed_.load(std::memory_order_acquire)) return false;
        slots_[tail % capacity_].emplace(std::move(value));
        tail_.store(tail + 1, std::memory_order_release);
        signal();
        return true;
      }
      if (!wait_until([&] {
            return tail_.load(std::memory_order_relaxed) - head_.load(std::memory_order_acquire) <
                   capacity_;
          }))
        return false;
    }
  }

  /// Blocks while the ring is empty. Returns nullopt once closed.
  std::optional<T> pop() {
    for (;;) {
      if (auto item = try_pop()) return item;
      if (!wait_until([&] {
            return tail_.load(std::memory_order_acquire) != head_.load(std::memory_order_relaxed);
          }))
        return try_pop();
    }
  }

  std::optional<T> try_pop() {
    const auto head = head_.load(std::memory_order_relaxed);
    if (head == tail_.load(std::memory_order_acquire)) return std::nullopt;
    auto& slot = slots_[head % capacity_];
    std::optional<T> item(std::move(*slot));
    slot.reset();
    head_.store(head + 1, std::memory_order_release);
    signal();
    return item;
  }

  /// Wakes both ends; later pushes fail, pops drain what is left.
  void close() {
    closed_.store(true, std::memory_order_release);
    signal();
  }

  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(tail_.load(std::memory_order_acquire) -
                                    head_.load(std::memory_order_acquire));
  }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  [[nodiscard]] bool closed() const { return closed_.load(std::memory_order_acquire); }

 private:
  void signal() {
    signal_.fetch_add(1, std::memory_order_seq_cst);
    signal_.notify_all();
  }

  // Returns true when ready() holds, false when the queue was closed first.
  template <class Ready>
  bool wait_until(Ready ready) {
    for (;;) {
      const auto seen = signal_.load(std::memory_order_seq_cst);
      if (ready()) return true;
      if (closed_.load(std::memory_order_acquire)) return false;
      signal_.wait(seen, std::memory_order_seq_cst);
    }
  }

  const std::size_t capacity_;
  std::unique_ptr<std::optional<T>[]> slots_;
  alignas(64) std::atomic<std::uint64_t> head_{0};
  alignas(64) std::atomic<std::uint64_t> tail_{0};
  alignas(64) std::atomic<std::uint32_t> signal_{0};
  std::atomic<bool> closed_{false};
};

/// Multi-producer FIFO; capacity 0 means unbounded.
template <class T>
class Channel {
 public:
  explicit Channel(std::size_t capacity = 0) : capacity_(capacity) {}

  Channel(const Channel&) = delete;
  Channel& operator=(const Channel&) = delete;

  bool push(T value) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return closed_ || capacity_ == 0 || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(value));
    lock.unlock();
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    return take(lock);
  }

  std::optional<T> try_pop() {
    std::unique_lock lock(mutex_);
    return take(lock);
  }

  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  [[nodiscard]] std::size_t size() const {
    std::lock_guard lock(mutex_);
    return items_.size();
  }

 private:
  std::optional<T> take(std::unique_lock<std::mutex>& lock) {
    if (items_.empty()) return std::nullopt;
    std::optional<T> item(std::move(items_.front()));
    items_.pop_front();
    lock.unlock();
    not_full_.notify_one();
    return item;
  }

  const std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<T> items_;
  bool closed_ = false;
};

}  // namespace statefarm
