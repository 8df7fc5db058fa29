#pragma once

// Task-farm engine: one emitter, a pool of workers, an optional collector and
// an optional feedback path (collector -> emitter -> workers).
//
//            +-> worker 0 --+
//   input -> emitter -> ...  +-> collector -> output
//       ^    +-> worker n --+       |
//       +---------- feedback -------+
//
// The engine is generic over a Behavior, which supplies the per-worker state
// and the callbacks run by each activity:
//
//   typename task_type, message_type, output_type, feedback_type, worker_state
//   worker_state make_worker(std::size_t position)
//   void process(worker_state&, Seq, task_type&, WorkerPort&)
//   void collect(Seq, std::size_t slot, message_type&&, CollectorPort&)
//   optional: on_feedback(worker_state&, const feedback_type&)
//             retire(worker_state&, WorkerPort&)       (worker about to exit)
//             finish(CollectorPort&)                   (after the last worker exit)
//             std::size_t route_key(const task_type&)  (KeyDirected scheduling)
//
// Ordering guarantees: every channel is FIFO, so a control closure posted to a
// worker runs after every task scheduled to that worker before it. Adaptivity
// relies on this to quiesce partitions without extra bookkeeping.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#if defined(__linux__)
#include <pthread.h>
#include <sched.h>
#endif

#include "statefarm/channel.hpp"
#include "statefarm/config.hpp"
#include "statefarm/partition_map.hpp"
#include "statefarm/scheduling.hpp"

namespace statefarm {

using Clock = std::chrono::steady_clock;

template <class T>
struct Sequenced {
  Seq seq;
  T value;
};

/// A task the emitter refused to schedule (e.g. routing key out of range).
struct Rejection {
  Seq seq;
  std::string reason;
};

struct RunMetrics {
  std::chrono::nanoseconds completion{0};
  std::uint64_t tasks_fed = 0;
  std::uint64_t tasks_processed = 0;
  std::uint64_t tasks_rejected = 0;
  std::vector<std::uint64_t> per_worker_processed;  // indexed by worker slot
  std::uint64_t collector_messages = 0;
  std::uint64_t feedback_forwarded = 0;
  std::size_t workers_started = 0;
  std::size_t peak_workers = 0;

  [[nodiscard]] double completion_us() const {
    return std::chrono::duration<double, std::micro>(completion).count();
  }
};

class FarmAborted : public FarmError {
 public:
  FarmAborted(const std::string& what, RunMetrics partial)
      : FarmError(what), partial_(std::move(partial)) {}
  [[nodiscard]] const RunMetrics& partial_metrics() const { return partial_; }

 private:
  RunMetrics partial_;
};

template <class Output>
struct FarmRun {
  std::vector<Sequenced<Output>> outputs;
  std::vector<Rejection> rejected;
  RunMetrics metrics;
};

template <class B>
concept FarmBehavior = requires {
  typename B::task_type;
  typename B::message_type;
  typename B::output_type;
  typename B::feedback_type;
  typename B::worker_state;
};

namespace detail {

inline void pin_current_thread(std::size_t index) {
#if defined(__linux__)
  const auto cores = std::max(1u, std::thread::hardware_concurrency());
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(static_cast<int>(index % cores), &set);
  (void)pthread_setaffinity_np(pthread_self(), sizeof(set), &set);
#else
  (void)index;
#endif
}

// Emitter input: bounded stream items plus an unbounded feedback lane that
// is always served first. The feedback lane never blocks its producer, which
// is what keeps the collector -> emitter -> worker -> collector cycle free of
// deadlock under backpressure.
template <class Input, class Feedback>
class EmitterInbox {
 public:
  struct FeedbackMsg {
    Feedback value;
  };
  struct Closed {};
  using Item = std::variant<Input, FeedbackMsg, Closed>;

  explicit EmitterInbox(std::size_t capacity) : capacity_(capacity) {}

  bool push_input(Input in) {
    std::unique_lock lock(mutex_);
    space_.wait(lock, [&] { return closed_ || aborted_ || inputs_.size() < capacity_; });
    if (closed_ || aborted_) return false;
    inputs_.push_back(std::move(in));
    lock.unlock();
    ready_.notify_one();
    return true;
  }

  bool push_feedback(Feedback fb) {
    {
      std::lock_guard lock(mutex_);
      if (aborted_) return false;
      feedback_.push_back(std::move(fb));
    }
    ready_.notify_one();
    return true;
  }

  Item pop() {
    std::unique_lock lock(mutex_);
    ready_.wait(lock,
                [&] { return aborted_ || closed_ || !feedback_.empty() || !inputs_.empty(); });
    if (aborted_) return Closed{};
    if (!feedback_.empty()) {
      Item item{FeedbackMsg{std::move(feedback_.front())}};
      feedback_.pop_front();
      return item;
    }
    if (!inputs_.empty()) {
      Item item{std::in_place_index<0>, std::move(inputs_.front())};
      inputs_.pop_front();
      lock.unlock();
      space_.notify_one();
      return item;
    }
    return Closed{};
  }

  std::optional<Feedback> try_pop_feedback() {
    std::lock_guard lock(mutex_);
    if (feedback_.empty()) return std::nullopt;
    auto fb = std::move(feedback_.front());
    feedback_.pop_front();
    return fb;
  }

  void close_input() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    ready_.notify_all();
    space_.notify_all();
  }

  void abort() {
    {
      std::lock_guard lock(mutex_);
      aborted_ = true;
    }
    ready_.notify_all();
    space_.notify_all();
  }

 private:
  const std::size_t capacity_;
  std::mutex mutex_;
  std::condition_variable ready_;
  std::condition_variable space_;
  std::deque<Input> inputs_;
  std::deque<Feedback> feedback_;
  bool closed_ = false;
  bool aborted_ = false;
};

}  // namespace detail

template <FarmBehavior Behavior>
class Farm {
 public:
  using behavior_type = Behavior;
  using task_type = typename Behavior::task_type;
  using message_type = typename Behavior::message_type;
  using output_type = typename Behavior::output_type;
  using feedback_type = typename Behavior::feedback_type;
  using worker_state = typename Behavior::worker_state;

  class WorkerPort;
  class CollectorPort;
  class EmitterView;

  using WorkerControl = std::function<void(worker_state&, WorkerPort&)>;
  using EmitterControl = std::function<void(EmitterView&)>;

  /// Sending side of a worker: everything a worker hands to the collector.
  class WorkerPort {
   public:
    void send(Seq seq, message_type msg) { farm_->deliver(seq, slot_, std::move(msg)); }
    [[nodiscard]] std::size_t slot() const { return slot_; }
    [[nodiscard]] bool aborted() const { return farm_->aborted(); }

   private:
    friend class Farm;
    WorkerPort(Farm* farm, std::size_t slot) : farm_(farm), slot_(slot) {}
    Farm* farm_;
    std::size_t slot_;
  };

  class CollectorPort {
   public:
    /// Per-task output; goes through the reorder buffer when ordering is on.
    void emit(Seq seq, output_type out) { farm_->sink_emit(seq, std::move(out), true); }
    /// Output that is not tied to input order (state emissions).
    void emit_state(Seq seq, output_type out) { farm_->sink_emit(seq, std::move(out), false); }
    void broadcast(feedback_type fb) { farm_->broadcast(std::move(fb)); }

   private:
    friend class Farm;
    explicit CollectorPort(Farm* farm) : farm_(farm) {}
    Farm* farm_;
  };

  /// Emitter-thread view handed to control closures. Positions index the
  /// current active worker set; slots are stable worker identities.
  class EmitterView {
   public:
    [[nodiscard]] std::size_t worker_count() const { return farm_->active_.size(); }
    [[nodiscard]] std::size_t slot_of(std::size_t position) const {
      return farm_->active_.at(position)->slot;
    }
    std::size_t add_worker(worker_state initial) { return farm_->add_worker(std::move(initial)); }
    /// Sends EndOfStream to the worker and drops it from scheduling. The
    /// worker drains its queue, runs retire() and exits.
    void retire(std::size_t position) { farm_->retire_position(position); }

    /// Runs fn(worker_state&, WorkerPort&) on the worker, after everything
    /// already queued to it.
    template <class Fn>
    auto post(std::size_t position, Fn fn)
        -> std::future<std::invoke_result_t<Fn&, worker_state&, WorkerPort&>> {
      using R = std::invoke_result_t<Fn&, worker_state&, WorkerPort&>;
      auto promise = std::make_shared<std::promise<R>>();
      auto future = promise->get_future();
      WorkerControl control = [promise, fn = std::move(fn)](worker_state& s,
                                                            WorkerPort& port) mutable {
        try {
          if constexpr (std::is_void_v<R>) {
            fn(s, port);
            promise->set_value();
          } else {
            promise->set_value(fn(s, port));
          }
        } catch (...) {
          promise->set_exception(std::current_exception());
        }
      };
      farm_->push_to_worker(*farm_->active_.at(position), ControlItem{std::move(control)});
      return future;
    }

    template <class R>
    R await(std::future<R>& future) {
      return farm_->await(future);
    }

    void set_partition_map(PartitionMap map) { farm_->partition_map_ = std::move(map); }
    [[nodiscard]] const std::optional<PartitionMap>& partition_map() const {
      return farm_->partition_map_;
    }
    [[nodiscard]] const std::optional<feedback_type>& latest_feedback() const {
      return farm_->latest_feedback_;
    }
    [[nodiscard]] const FarmConfig& config() const { return farm_->config_; }
    Behavior& behavior() { return farm_->behavior_; }

   private:
    friend class Farm;
    explicit EmitterView(Farm* farm) : farm_(farm) {}
    Farm* farm_;
  };

  Farm(FarmConfig config, Behavior behavior, std::optional<PartitionMap> map = std::nullopt)
      : config_(config),
        behavior_(std::move(behavior)),
        partition_map_(std::move(map)),
        inbox_(config.queue_capacity),
        collector_inbox_(config.queue_capacity * std::max<std::size_t>(config.n_workers, 1)) {
    config_.validate();
    if (config_.scheduling == Scheduling::KeyDirected) {
      if constexpr (!requires(Behavior& b, const task_type& t) {
                      { b.route_key(t) } -> std::convertible_to<std::size_t>;
                    }) {
        throw FarmError("key-directed scheduling needs a routing function");
      }
      if (!partition_map_) throw FarmError("key-directed scheduling needs a partition map");
      if (partition_map_->workers() != config_.n_workers)
        throw FarmError("partition map does not match the worker count");
    }
    try {
      for (std::size_t i = 0; i < config_.n_workers; ++i) add_worker(behavior_.make_worker(i));
      if (config_.collector_enabled) collector_ = std::thread([this] { collector_loop(); });
      emitter_ = std::thread([this] { emitter_loop(); });
    } catch (...) {
      abort(std::current_exception());
      join_threads();
      throw;
    }
  }

  Farm(const Farm&) = delete;
  Farm& operator=(const Farm&) = delete;

  ~Farm() {
    if (!joined_) {
      abort(nullptr);
      join_threads();
    }
  }

  void feed(task_type task) {
    mark_start();
    if (!inbox_.push_input(InputItem{std::in_place_index<0>, std::move(task)}))
      throw FarmError(aborted() ? "farm aborted" : "input already closed");
  }

  void close_input() {
    mark_start();
    inbox_.close_input();
  }

  /// Runs fn(EmitterView&) on the emitter, in stream order relative to feed().
  template <class Fn>
  auto control(Fn fn) -> std::future<std::invoke_result_t<Fn&, EmitterView&>> {
    using R = std::invoke_result_t<Fn&, EmitterView&>;
    auto promise = std::make_shared<std::promise<R>>();
    auto future = promise->get_future();
    EmitterControl control = [promise, fn = std::move(fn)](EmitterView& view) mutable {
      try {
        if constexpr (std::is_void_v<R>) {
          fn(view);
          promise->set_value();
        } else {
          promise->set_value(fn(view));
        }
      } catch (...) {
        promise->set_exception(std::current_exception());
      }
    };
    if (!inbox_.push_input(InputItem{std::in_place_index<1>, std::move(control)}))
      throw FarmError(aborted() ? "farm aborted" : "input already closed");
    return future;
  }

  /// Waits for a control future; fails instead of hanging if the farm aborts.
  template <class R>
  R await(std::future<R>& future) {
    while (future.wait_for(std::chrono::milliseconds(1)) != std::future_status::ready) {
      if (aborted()) throw FarmError("farm aborted while waiting for a control request");
    }
    return future.get();
  }

  /// Injects an update on the feedback path, as the collector does.
  void broadcast(feedback_type fb) {
    if (!config_.feedback_enabled) throw FarmError("feedback channel is disabled");
    inbox_.push_feedback(std::move(fb));
  }

  /// Closes the input if still open, waits for termination and returns the
  /// outputs not yet drained. Throws FarmAborted if any activity failed.
  FarmRun<output_type> join() {
    if (joined_) throw FarmError("farm already joined");
    close_input();
    join_threads();
    joined_ = true;
    FarmRun<output_type> run;
    run.metrics = collect_metrics();
    {
      std::lock_guard lock(sink_mutex_);
      run.outputs = std::move(outputs_);
      run.rejected = std::move(rejected_);
    }
    if (error_) {
      std::string what = "farm aborted";
      try {
        std::rethrow_exception(error_);
      } catch (const std::exception& e) {
        what += ": ";
        what += e.what();
      } catch (...) {
      }
      throw FarmAborted(what, run.metrics);
    }
    return run;
  }

  /// Outputs delivered so far; later calls return only newer items.
  std::vector<Sequenced<output_type>> drain() {
    std::lock_guard lock(sink_mutex_);
    return std::exchange(outputs_, {});
  }

  [[nodiscard]] std::size_t active_workers() const { return active_count_.load(); }
  [[nodiscard]] std::size_t started_workers() const { return started_count_.load(); }
  [[nodiscard]] bool aborted() const { return aborted_.load(std::memory_order_acquire); }
  [[nodiscard]] const FarmConfig& config() const { return config_; }
  Behavior& behavior() { return behavior_; }
  const Behavior& behavior() const { return behavior_; }

 private:
  struct TaskItem {
    Seq seq;
    task_type task;
  };
  struct ControlItem {
    WorkerControl fn;
  };
  struct EndItem {};
  using WorkerItem = std::variant<TaskItem, ControlItem, EndItem>;

  struct Delivered {
    Seq seq;
    std::size_t slot;
    message_type msg;
  };
  struct Exited {
    std::size_t slot;
  };
  struct ExpectExits {
    std::size_t total;
  };
  struct RejectedTask {
    Seq seq;
    std::string reason;
  };
  using CollectorItem = std::variant<Delivered, Exited, ExpectExits, RejectedTask>;

  using InputItem = std::variant<task_type, EmitterControl>;

  struct Worker {
    Worker(std::size_t s, std::size_t capacity, worker_state init)
        : slot(s), inbox(capacity), state(std::move(init)) {}
    std::size_t slot;
    SpscQueue<WorkerItem> inbox;
    Channel<feedback_type> mailbox;
    std::atomic<std::uint64_t> processed{0};
    worker_state state;
    std::thread thread;
  };

  // ---- emitter -----------------------------------------------------------

  void emitter_loop() {
    if (config_.pin_threads) detail::pin_current_thread(0);
    EmitterView view(this);
    try {
      for (;;) {
        auto item = inbox_.pop();
        if (aborted()) return;
        if (auto* fb = std::get_if<typename Inbox::FeedbackMsg>(&item)) {
          forward(std::move(fb->value));
          continue;
        }
        if (std::holds_alternative<typename Inbox::Closed>(item)) break;
        auto& input = std::get<0>(item);
        if (auto* task = std::get_if<task_type>(&input)) {
          dispatch(std::move(*task));
        } else {
          std::get<EmitterControl>(input)(view);
        }
      }
      while (auto fb = inbox_.try_pop_feedback()) forward(std::move(*fb));
      for (auto* w : active_) push_to_worker(*w, EndItem{});
      active_.clear();
      active_count_.store(0);
      if (config_.collector_enabled) {
        std::size_t total;
        {
          std::lock_guard lock(workers_mutex_);
          total = workers_.size();
        }
        collector_inbox_.push(ExpectExits{total});
      }
    } catch (...) {
      abort(std::current_exception());
    }
  }

  void dispatch(task_type task) {
    const Seq seq = next_seq_++;
    while (auto fb = inbox_.try_pop_feedback()) forward(std::move(*fb));
    if (active_.empty()) throw FarmError("no active worker");
    std::size_t position = 0;
    switch (config_.scheduling) {
      case Scheduling::RoundRobin:
        position = rr_previous_ = round_robin_next(rr_previous_, active_.size());
        break;
      case Scheduling::OnDemand: {
        occupancy_.resize(active_.size());
        for (std::size_t i = 0; i < active_.size(); ++i) occupancy_[i] = active_[i]->inbox.size();
        position = on_demand_pick(occupancy_);
        break;
      }
      case Scheduling::KeyDirected: {
        if constexpr (requires(Behavior& b, const task_type& t) { b.route_key(t); }) {
          const std::size_t key = behavior_.route_key(task);
          if (key >= partition_map_->partitions()) {
            reject(seq, "routing key " + std::to_string(key) + " outside [0," +
                            std::to_string(partition_map_->partitions()) + ")");
            return;
          }
          position = key_directed_owner(*partition_map_, key);
        }
        break;
      }
    }
    push_to_worker(*active_[position], TaskItem{seq, std::move(task)});
  }

  void forward(feedback_type fb) {
    latest_feedback_ = fb;
    ++feedback_forwarded_;
    for (auto* w : active_) w->mailbox.push(fb);
  }

  void reject(Seq seq, std::string reason) {
    ++tasks_rejected_;
    if (config_.collector_enabled) {
      collector_inbox_.push(RejectedTask{seq, std::move(reason)});
    } else {
      std::lock_guard lock(sink_mutex_);
      rejected_.push_back({seq, std::move(reason)});
    }
  }

  void push_to_worker(Worker& w, WorkerItem item) {
    if (!w.inbox.push(std::move(item)) && !aborted())
      throw FarmError("worker input queue closed");
  }

  std::size_t add_worker(worker_state initial) {
    std::lock_guard lock(workers_mutex_);
    if (aborted()) throw FarmError("farm aborted");
    const std::size_t slot = workers_.size();
    auto& w = *workers_.emplace_back(
        std::make_unique<Worker>(slot, config_.queue_capacity, std::move(initial)));
    w.thread = std::thread([this, &w] { worker_loop(w); });
    active_.push_back(&w);
    active_count_.store(active_.size());
    started_count_.fetch_add(1);
    peak_workers_ = std::max(peak_workers_, active_.size());
    if (active_.size() > 1 && rr_previous_ >= active_.size()) rr_previous_ = active_.size() - 1;
    return active_.size() - 1;
  }

  void retire_position(std::size_t position) {
    if (active_.size() <= 1) throw FarmError("cannot retire the last worker");
    auto* w = active_.at(position);
    active_.erase(active_.begin() + static_cast<std::ptrdiff_t>(position));
    active_count_.store(active_.size());
    // keep round-robin continuing from the same successor
    if (rr_previous_ >= position && rr_previous_ > 0) --rr_previous_;
    rr_previous_ %= active_.size();
    push_to_worker(*w, EndItem{});
  }

  // ---- workers -----------------------------------------------------------

  void worker_loop(Worker& w) {
    if (config_.pin_threads) detail::pin_current_thread(w.slot + 1);
    WorkerPort port(this, w.slot);
    try {
      for (;;) {
        auto item = w.inbox.pop();
        if (!item || aborted()) return;
        drain_mailbox(w);
        if (auto* task = std::get_if<TaskItem>(&*item)) {
          behavior_.process(w.state, task->seq, task->task, port);
          w.processed.fetch_add(1, std::memory_order_relaxed);
        } else if (auto* control = std::get_if<ControlItem>(&*item)) {
          control->fn(w.state, port);
        } else {
          if constexpr (requires { behavior_.retire(w.state, port); }) behavior_.retire(w.state, port);
          if (config_.collector_enabled) collector_inbox_.push(Exited{w.slot});
          return;
        }
      }
    } catch (...) {
      abort(std::current_exception());
    }
  }

  void drain_mailbox(Worker& w) {
    while (auto fb = w.mailbox.try_pop()) {
      if constexpr (requires { behavior_.on_feedback(w.state, *fb); })
        behavior_.on_feedback(w.state, *fb);
    }
  }

  void deliver(Seq seq, std::size_t slot, message_type msg) {
    if (config_.collector_enabled) {
      if (!collector_inbox_.push(Delivered{seq, slot, std::move(msg)}) && !aborted())
        throw FarmError("collector channel closed");
      return;
    }
    // no collector: the worker delivers straight to the output stream
    std::lock_guard lock(inline_collect_mutex_);
    CollectorPort port(this);
    behavior_.collect(seq, slot, std::move(msg), port);
  }

  // ---- collector ---------------------------------------------------------

  void collector_loop() {
    if (config_.pin_threads) detail::pin_current_thread(config_.n_workers + 1);
    CollectorPort port(this);
    std::size_t exits = 0;
    std::optional<std::size_t> expected;
    try {
      while (!expected || exits < *expected) {
        auto item = collector_inbox_.pop();
        if (!item || aborted()) return;
        if (auto* d = std::get_if<Delivered>(&*item)) {
          ++collector_messages_;
          behavior_.collect(d->seq, d->slot, std::move(d->msg), port);
        } else if (std::holds_alternative<Exited>(*item)) {
          ++exits;
        } else if (auto* e = std::get_if<ExpectExits>(&*item)) {
          expected = e->total;
        } else {
          auto& r = std::get<RejectedTask>(*item);
          std::lock_guard lock(sink_mutex_);
          rejected_.push_back({r.seq, std::move(r.reason)});
          if (config_.preserve_order) {
            reorder_.emplace(r.seq, std::nullopt);
            flush_reorder();
          }
        }
      }
      if constexpr (requires { behavior_.finish(port); }) behavior_.finish(port);
    } catch (...) {
      abort(std::current_exception());
    }
  }

  void sink_emit(Seq seq, output_type out, bool ordered) {
    std::lock_guard lock(sink_mutex_);
    if (ordered && config_.preserve_order) {
      reorder_.emplace(seq, std::move(out));
      flush_reorder();
    } else {
      outputs_.push_back({seq, std::move(out)});
    }
  }

  // Unbounded: holds every output that arrives ahead of a slower sequence.
  void flush_reorder() {
    for (auto it = reorder_.begin(); it != reorder_.end() && it->first == next_in_order_;
         it = reorder_.erase(it)) {
      if (it->second) outputs_.push_back({it->first, std::move(*it->second)});
      ++next_in_order_;
    }
  }

  // ---- lifecycle ---------------------------------------------------------

  void mark_start() {
    std::call_once(start_once_, [this] { start_ = Clock::now(); });
  }

  void abort(std::exception_ptr cause) {
    {
      std::lock_guard lock(error_mutex_);
      if (cause && !error_) error_ = cause;
    }
    if (aborted_.exchange(true)) return;
    inbox_.abort();
    collector_inbox_.close();
    std::lock_guard lock(workers_mutex_);
    for (auto& w : workers_) {
      w->inbox.close();
      w->mailbox.close();
    }
  }

  void join_threads() {
    if (emitter_.joinable()) emitter_.join();
    // workers never shrink in the list, but the emitter may have appended
    for (std::size_t i = 0;; ++i) {
      Worker* w = nullptr;
      {
        std::lock_guard lock(workers_mutex_);
        if (i >= workers_.size()) break;
        w = workers_[i].get();
      }
      if (w->thread.joinable()) w->thread.join();
    }
    if (collector_.joinable()) collector_.join();
    end_ = Clock::now();
  }

  RunMetrics collect_metrics() {
    RunMetrics m;
    if (start_) m.completion = std::chrono::duration_cast<std::chrono::nanoseconds>(end_ - *start_);
    m.tasks_fed = next_seq_;
    m.tasks_rejected = tasks_rejected_;
    std::lock_guard lock(workers_mutex_);
    for (auto& w : workers_) {
      m.per_worker_processed.push_back(w->processed.load());
      m.tasks_processed += w->processed.load();
    }
    m.collector_messages = collector_messages_;
    m.feedback_forwarded = feedback_forwarded_;
    m.workers_started = workers_.size();
    m.peak_workers = peak_workers_;
    return m;
  }

  using Inbox = detail::EmitterInbox<InputItem, feedback_type>;

  FarmConfig config_;
  Behavior behavior_;
  std::optional<PartitionMap> partition_map_;
  Inbox inbox_;
  Channel<CollectorItem> collector_inbox_;

  std::mutex workers_mutex_;
  std::deque<std::unique_ptr<Worker>> workers_;

  // emitter-thread state
  std::vector<Worker*> active_;
  std::vector<std::size_t> occupancy_;
  std::size_t rr_previous_ = static_cast<std::size_t>(-1);
  Seq next_seq_ = 0;
  std::optional<feedback_type> latest_feedback_;
  std::uint64_t feedback_forwarded_ = 0;
  std::uint64_t tasks_rejected_ = 0;
  std::size_t peak_workers_ = 0;
  std::atomic<std::size_t> active_count_{0};
  std::atomic<std::size_t> started_count_{0};

  // collector-side state
  std::uint64_t collector_messages_ = 0;
  std::mutex inline_collect_mutex_;
  std::mutex sink_mutex_;
  std::vector<Sequenced<output_type>> outputs_;
  std::vector<Rejection> rejected_;
  std::map<Seq, std::optional<output_type>> reorder_;
  Seq next_in_order_ = 0;

  std::atomic<bool> aborted_{false};
  std::mutex error_mutex_;
  std::exception_ptr error_;
  std::once_flag start_once_;
  std::optional<Clock::time_point> start_;
  Clock::time_point end_{};
  bool joined_ = false;

  std::thread emitter_;
  std::thread collector_;
};

}  // namespace statefarm
