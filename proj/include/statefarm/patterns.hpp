#pragma once

// The five state access patterns, each as a pattern specification (the user
// functions and initial state) and a farm Behavior implementing it.
//
//   Serial       one shared state cell; f and s of a task run under one lock,
//                in input order. No parallelism by construction.
//   Partitioned  state vector of N entries; h(x) picks the entry, the entry
//                lives in exactly one worker and the emitter routes by owner.
//   Accumulator  s(x, s') = g(x) (+) s'; workers fold locally and flush to
//                the collector every `flush_frequency` tasks.
//   Approx       collector keeps the best value, workers hold a possibly stale
//                copy refreshed over the feedback channel.
//   Separate     y = f(x) runs unlocked, only s(y, state) is serialized.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "statefarm/config.hpp"
#include "statefarm/partition_map.hpp"

namespace statefarm {

enum class PatternKind { Serial, Partitioned, Accumulator, Approx, Separate };

inline std::string_view to_string(PatternKind k) {
  switch (k) {
    case PatternKind::Serial:
      return "serial";
    case PatternKind::Partitioned:
      return "partitioned";
    case PatternKind::Accumulator:
      return "accumulator";
    case PatternKind::Approx:
      return "approx";
    case PatternKind::Separate:
      return "separate";
  }
  return "?";
}

inline std::optional<PatternKind> pattern_from_string(std::string_view name) {
  for (auto k : {PatternKind::Serial, PatternKind::Partitioned, PatternKind::Accumulator,
                 PatternKind::Approx, PatternKind::Separate}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

template <class Task, class State, class Result>
struct SerialSpec {
  std::function<Result(const Task&, const State&)> f;
  std::function<State(const Task&, const State&)> s;
  State s0{};
};

template <class Task, class State, class Result>
struct PartitionedSpec {
  std::function<Result(const Task&, const State&)> f;
  std::function<State(const Task&, const State&)> s;
  std::function<std::size_t(const Task&)> h;
  std::size_t partitions = 1;
  State s_init{};
};

template <class Task, class State, class Result>
struct AccumulatorSpec {
  std::function<Result(const Task&, const State&)> f;
  std::function<State(const Task&)> g;
  std::function<State(const State&, const State&)> oplus;  // associative, commutative
  State s_zero{};                                          // identity of oplus
  std::size_t flush_frequency = 1;
};

template <class Task, class State>
struct ApproxSpec {
  std::function<bool(const Task&, const State&)> c;
  std::function<State(const Task&, const State&)> s_prime;  // s_prime(x, s) <= s
  std::function<bool(const State&, const State&)> less = std::less<State>{};
  State s_init{};
};

template <class Task, class State, class Result>
struct SeparateSpec {
  std::function<Result(const Task&)> f;
  std::function<State(const Result&, const State&)> s;
  State s0{};
  std::function<bool(const State&)> emit_cond;  // empty: emit every update
};

template <class Task, class State, class Result>
using PatternSpec =
    std::variant<SerialSpec<Task, State, Result>, PartitionedSpec<Task, State, Result>,
                 AccumulatorSpec<Task, State, Result>, ApproxSpec<Task, State>,
                 SeparateSpec<Task, State, Result>>;

template <class Task, class State, class Result>
PatternKind kind_of(const PatternSpec<Task, State, Result>& spec) {
  return static_cast<PatternKind>(spec.index());
}

/// Checks that every callback is set and parameters are in range.
template <class Task, class State, class Result>
void validate_pattern(const PatternSpec<Task, State, Result>& spec) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw FarmError(what);
  };
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, SerialSpec<Task, State, Result>>) {
          require(p.f && p.s, "serial pattern needs f and s");
        } else if constexpr (std::is_same_v<P, PartitionedSpec<Task, State, Result>>) {
          require(p.f && p.s && p.h, "partitioned pattern needs f, s and h");
          require(p.partitions >= 1, "partitioned pattern needs N >= 1");
        } else if constexpr (std::is_same_v<P, AccumulatorSpec<Task, State, Result>>) {
          require(p.f && p.g && p.oplus, "accumulator pattern needs f, g and oplus");
          require(p.flush_frequency >= 1, "flush frequency must be >= 1");
        } else if constexpr (std::is_same_v<P, ApproxSpec<Task, State>>) {
          require(p.c && p.s_prime && p.less, "approx pattern needs c, s_prime and an order");
        } else {
          require(p.f && p.s, "separate pattern needs f and s");
        }
      },
      spec);
}

/// Pattern-level counters, filled in by the behaviors.
struct PatternCounters {
  std::uint64_t updates_sent = 0;        // accumulator flushes, approx candidates
  std::uint64_t updates_accepted = 0;    // folded / accepted at the collector
  std::uint64_t updates_discarded = 0;   // approx candidates not strictly better
  std::uint64_t state_updates = 0;       // serial / separate cell writes
  std::uint64_t migrated_entries = 0;    // partition entries moved between workers
  std::uint64_t ownership_violations = 0;
  std::uint64_t merges = 0;
};

namespace detail {

struct CounterBlock {
  std::atomic<std::uint64_t> updates_sent{0};
  std::atomic<std::uint64_t> updates_accepted{0};
  std::atomic<std::uint64_t> updates_discarded{0};
  std::atomic<std::uint64_t> state_updates{0};
  std::atomic<std::uint64_t> migrated_entries{0};
  std::atomic<std::uint64_t> ownership_violations{0};
  std::atomic<std::uint64_t> merges{0};

  [[nodiscard]] PatternCounters snapshot() const {
    return {updates_sent.load(),     updates_accepted.load(), updates_discarded.load(),
            state_updates.load(),    migrated_entries.load(), ownership_violations.load(),
            merges.load()};
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Serial

template <class Task, class State, class Result>
class SerialBehavior {
 public:
  static constexpr PatternKind kind = PatternKind::Serial;
  using spec_type = SerialSpec<Task, State, Result>;
  using task_type = Task;
  using message_type = Result;
  using output_type = Result;
  using feedback_type = std::monostate;
  using worker_state = std::monostate;

  explicit SerialBehavior(spec_type spec)
      : spec_(std::make_shared<const spec_type>(std::move(spec))), cell_(std::make_shared<Cell>()) {
    cell_->state = spec_->s0;
  }

  worker_state make_worker(std::size_t) { return {}; }

  // The cell is taken in input order (ticket = seq) and held for f and s.
  template <class Port>
  void process(worker_state&, Seq seq, const Task& x, Port& port) {
    std::unique_lock lock(cell_->mutex);
    while (cell_->turn != seq) {
      if (port.aborted()) return;
      cell_->turn_changed.wait_for(lock, std::chrono::milliseconds(1));
    }
    Result y = spec_->f(x, cell_->state);
    cell_->state = spec_->s(x, cell_->state);
    ++cell_->turn;
    counters_->state_updates.fetch_add(1, std::memory_order_relaxed);
    port.send(seq, std::move(y));
    lock.unlock();
    cell_->turn_changed.notify_all();
  }

  template <class Port>
  void collect(Seq seq, std::size_t, Result&& y, Port& port) {
    port.emit(seq, std::move(y));
  }

  [[nodiscard]] State final_state() const {
    std::lock_guard lock(cell_->mutex);
    return cell_->state;
  }
  [[nodiscard]] PatternCounters counters() const { return counters_->snapshot(); }

 private:
  struct Cell {
    mutable std::mutex mutex;
    std::condition_variable turn_changed;
    State state{};
    Seq turn = 0;
  };
  std::shared_ptr<const spec_type> spec_;
  std::shared_ptr<Cell> cell_;
  std::shared_ptr<detail::CounterBlock> counters_ = std::make_shared<detail::CounterBlock>();
};

// ---------------------------------------------------------------------------
// Fully partitioned

template <class Task, class State, class Result>
class PartitionedBehavior {
 public:
  static constexpr PatternKind kind = PatternKind::Partitioned;
  using spec_type = PartitionedSpec<Task, State, Result>;

  struct Entry {
    std::size_t partition;
    State value;
  };

  /// Entries held by one worker.
  struct Slice {
    std::map<std::size_t, State> entries;
  };

  using task_type = Task;
  using message_type = std::variant<Result, Entry>;
  using output_type = Result;
  using feedback_type = std::monostate;
  using worker_state = Slice;

  PartitionedBehavior(spec_type spec, std::size_t n_workers)
      : spec_(std::make_shared<const spec_type>(std::move(spec))),
        initial_map_(spec_->partitions, n_workers),
        shared_(std::make_shared<Shared>(spec_->partitions)) {}

  worker_state make_worker(std::size_t position) {
    Slice slice;
    for (auto i : initial_map_.owned_by(position)) slice.entries.emplace(i, spec_->s_init);
    return slice;
  }

  [[nodiscard]] const PartitionMap& initial_map() const { return initial_map_; }

  std::size_t route_key(const Task& x) { return spec_->h(x); }

  template <class Port>
  void process(Slice& slice, Seq seq, const Task& x, Port& port) {
    const auto key = spec_->h(x);
    const auto me = static_cast<std::int64_t>(port.slot());
    auto& holder = shared_->holders.at(key);
    std::int64_t expected = -1;
    if (!holder.compare_exchange_strong(expected, me, std::memory_order_acq_rel)) {
      counters_->ownership_violations.fetch_add(1);
      throw FarmError("partition " + std::to_string(key) + " used by two workers at once");
    }
    auto it = slice.entries.find(key);
    if (it == slice.entries.end()) {
      holder.store(-1, std::memory_order_release);
      counters_->ownership_violations.fetch_add(1);
      throw FarmError("worker " + std::to_string(me) + " does not own partition " +
                      std::to_string(key));
    }
    Result y = spec_->f(x, it->second);
    it->second = spec_->s(x, it->second);
    holder.store(-1, std::memory_order_release);
    port.send(seq, message_type{std::in_place_index<0>, std::move(y)});
  }

  // Workers hand their entries to the collector before exiting.
  template <class Port>
  void retire(Slice& slice, Port& port) {
    for (auto& [i, v] : slice.entries)
      port.send(0, message_type{std::in_place_index<1>, Entry{i, std::move(v)}});
    slice.entries.clear();
  }

  template <class Port>
  void collect(Seq seq, std::size_t, message_type&& msg, Port& port) {
    if (auto* y = std::get_if<0>(&msg)) {
      port.emit(seq, std::move(*y));
      return;
    }
    auto& e = std::get<1>(msg);
    auto& slot = shared_->final_state.at(e.partition);
    if (slot) counters_->ownership_violations.fetch_add(1);
    slot = std::move(e.value);
  }

  /// Removes and returns the listed entries; all must be held by the slice.
  static std::vector<Entry> extract(Slice& slice, const std::vector<std::size_t>& partitions) {
    std::vector<Entry> out;
    out.reserve(partitions.size());
    for (auto i : partitions) {
      auto node = slice.entries.extract(i);
      if (node.empty())
        throw FarmError("migration source does not hold partition " + std::to_string(i));
      out.push_back({i, std::move(node.mapped())});
    }
    return out;
  }

  static void install(Slice& slice, std::vector<Entry> entries) {
    for (auto& e : entries) {
      if (!slice.entries.emplace(e.partition, std::move(e.value)).second)
        throw FarmError("migration target already holds partition " +
                        std::to_string(e.partition));
    }
  }

  void record_migration(std::size_t moved) { counters_->migrated_entries.fetch_add(moved); }

  /// Final state vector, valid after the farm has terminated.
  [[nodiscard]] std::vector<State> final_state() const {
    std::vector<State> out;
    out.reserve(shared_->final_state.size());
    for (std::size_t i = 0; i < shared_->final_state.size(); ++i) {
      if (!shared_->final_state[i]) throw FarmError("partition " + std::to_string(i) + " lost");
      out.push_back(*shared_->final_state[i]);
    }
    return out;
  }
  [[nodiscard]] PatternCounters counters() const { return counters_->snapshot(); }

 private:
  struct Shared {
    explicit Shared(std::size_t n) : holders(n), final_state(n) {
      for (auto& h : holders) h.store(-1);
    }
    std::vector<std::atomic<std::int64_t>> holders;  // slot processing entry i, or -1
    std::vector<std::optional<State>> final_state;   // collector only
  };
  std::shared_ptr<const spec_type> spec_;
  PartitionMap initial_map_;
  std::shared_ptr<Shared> shared_;
  std::shared_ptr<detail::CounterBlock> counters_ = std::make_shared<detail::CounterBlock>();
};

// ---------------------------------------------------------------------------
// Accumulator

template <class Task, class State, class Result>
class AccumulatorBehavior {
 public:
  static constexpr PatternKind kind = PatternKind::Accumulator;
  using spec_type = AccumulatorSpec<Task, State, Result>;

  struct Flush {
    State value;
  };
  struct Local {
    State value;
    std::size_t pending = 0;  // tasks folded since the last flush
  };

  using task_type = Task;
  using message_type = std::variant<Result, Flush>;
  using output_type = Result;
  using feedback_type = std::monostate;
  using worker_state = Local;

  explicit AccumulatorBehavior(spec_type spec)
      : spec_(std::make_shared<const spec_type>(std::move(spec))),
        global_(std::make_shared<State>(spec_->s_zero)) {}

  worker_state make_worker(std::size_t) { return zero(); }
  [[nodiscard]] Local zero() const { return {spec_->s_zero, 0}; }

  // The result reads the worker's local partial state, not the global one.
  template <class Port>
  void process(Local& local, Seq seq, const Task& x, Port& port) {
    Result y = spec_->f(x, local.value);
    port.send(seq, message_type{std::in_place_index<0>, std::move(y)});
    local.value = spec_->oplus(spec_->g(x), local.value);
    if (++local.pending >= spec_->flush_frequency) flush(local, seq, port);
  }

  template <class Port>
  void retire(Local& local, Port& port) {
    if (local.pending > 0) flush(local, 0, port);
  }

  template <class Port>
  void collect(Seq seq, std::size_t, message_type&& msg, Port& port) {
    if (auto* y = std::get_if<0>(&msg)) {
      port.emit(seq, std::move(*y));
      return;
    }
    *global_ = spec_->oplus(*global_, std::get<1>(msg).value);
    counters_->updates_accepted.fetch_add(1, std::memory_order_relaxed);
  }

  /// Folds `other` into `survivor`; used when two workers are merged.
  void absorb(Local& survivor, const Local& other) const {
    survivor.value = spec_->oplus(survivor.value, other.value);
    survivor.pending += other.pending;
  }
  void record_merge() { counters_->merges.fetch_add(1); }

  [[nodiscard]] State final_state() const { return *global_; }
  [[nodiscard]] PatternCounters counters() const { return counters_->snapshot(); }

 private:
  template <class Port>
  void flush(Local& local, Seq seq, Port& port) {
    port.send(seq, message_type{std::in_place_index<1>, Flush{std::move(local.value)}});
    local = zero();
    counters_->updates_sent.fetch_add(1, std::memory_order_relaxed);
  }

  std::shared_ptr<const spec_type> spec_;
  std::shared_ptr<State> global_;  // collector only
  std::shared_ptr<detail::CounterBlock> counters_ = std::make_shared<detail::CounterBlock>();
};

// ---------------------------------------------------------------------------
// Successive approximation

template <class Task, class State>
class ApproxBehavior {
 public:
  static constexpr PatternKind kind = PatternKind::Approx;
  using spec_type = ApproxSpec<Task, State>;

  struct LocalCopy {
    State value;
  };

  using task_type = Task;
  using message_type = State;  // candidate
  using output_type = State;   // accepted approximations
  using feedback_type = State;
  using worker_state = LocalCopy;

  explicit ApproxBehavior(spec_type spec)
      : spec_(std::make_shared<const spec_type>(std::move(spec))),
        global_(std::make_shared<State>(spec_->s_init)) {}

  worker_state make_worker(std::size_t) { return {spec_->s_init}; }
  [[nodiscard]] const State& initial() const { return spec_->s_init; }

  // Candidates come from the local copy, which may lag the collector.
  template <class Port>
  void process(LocalCopy& local, Seq seq, const Task& x, Port& port) {
    if (!spec_->c(x, local.value)) return;
    counters_->updates_sent.fetch_add(1, std::memory_order_relaxed);
    port.send(seq, spec_->s_prime(x, local.value));
  }

  void on_feedback(LocalCopy& local, const State& update) { local.value = update; }

  // Strictly better candidates only; equal or worse ones are discarded.
  template <class Port>
  void collect(Seq seq, std::size_t, State&& candidate, Port& port) {
    if (!spec_->less(candidate, *global_)) {
      counters_->updates_discarded.fetch_add(1, std::memory_order_relaxed);
      return;
    }
    *global_ = candidate;
    counters_->updates_accepted.fetch_add(1, std::memory_order_relaxed);
    port.emit_state(seq, candidate);
    port.broadcast(std::move(candidate));
  }

  [[nodiscard]] State final_state() const { return *global_; }
  [[nodiscard]] PatternCounters counters() const { return counters_->snapshot(); }

 private:
  std::shared_ptr<const spec_type> spec_;
  std::shared_ptr<State> global_;  // collector only
  std::shared_ptr<detail::CounterBlock> counters_ = std::make_shared<detail::CounterBlock>();
};

// ---------------------------------------------------------------------------
// Separate task/state functions

template <class Task, class State, class Result>
class SeparateBehavior {
 public:
  static constexpr PatternKind kind = PatternKind::Separate;
  using spec_type = SeparateSpec<Task, State, Result>;
  using task_type = Task;
  using message_type = State;
  using output_type = State;
  using feedback_type = std::monostate;
  using worker_state = std::monostate;

  explicit SeparateBehavior(spec_type spec)
      : spec_(std::make_shared<const spec_type>(std::move(spec))), cell_(std::make_shared<Cell>()) {
    cell_->state = spec_->s0;
  }

  worker_state make_worker(std::size_t) { return {}; }

  // Read-modify-write-emit is one critical section, so the emitted stream
  // follows the update order.
  template <class Port>
  void process(worker_state&, Seq seq, const Task& x, Port& port) {
    Result y = spec_->f(x);
    std::lock_guard lock(cell_->mutex);
    cell_->state = spec_->s(y, cell_->state);
    counters_->state_updates.fetch_add(1, std::memory_order_relaxed);
    if (!spec_->emit_cond || spec_->emit_cond(cell_->state)) port.send(seq, cell_->state);
  }

  template <class Port>
  void collect(Seq seq, std::size_t, State&& s, Port& port) {
    port.emit_state(seq, std::move(s));
  }

  [[nodiscard]] State final_state() const {
    std::lock_guard lock(cell_->mutex);
    return cell_->state;
  }
  [[nodiscard]] PatternCounters counters() const { return counters_->snapshot(); }

 private:
  struct Cell {
    mutable std::mutex mutex;
    State state{};
  };
  std::shared_ptr<const spec_type> spec_;
  std::shared_ptr<Cell> cell_;
  std::shared_ptr<detail::CounterBlock> counters_ = std::make_shared<detail::CounterBlock>();
};

}  // namespace statefarm
