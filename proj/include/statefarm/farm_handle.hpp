#pragma once

// Pattern-level entry points: build a farm from a PatternSpec, feed it, adapt
// it and collect a PatternOutcome.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <thread>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "statefarm/adaptivity.hpp"
#include "statefarm/farm.hpp"
#include "statefarm/patterns.hpp"

namespace statefarm {

template <class State, class Result>
struct PatternOutcome {
  std::vector<Sequenced<Result>> results;  // per-task results, delivery order
  std::vector<Sequenced<State>> states;    // state stream (approx, separate)
  std::vector<State> final_state;          // one value; N values when partitioned
  std::vector<Rejection> rejected;
  RunMetrics metrics;
  PatternCounters counters;

  [[nodiscard]] std::vector<Result> result_values() const {
    std::vector<Result> out;
    out.reserve(results.size());
    for (const auto& r : results) out.push_back(r.value);
    return out;
  }
  [[nodiscard]] std::vector<State> state_values() const {
    std::vector<State> out;
    out.reserve(states.size());
    for (const auto& s : states) out.push_back(s.value);
    return out;
  }
};

/// A grow (delta > 0) or shrink (delta < 0) applied before task `at_task` is fed.
struct AdaptivityEvent {
  std::uint64_t at_task = 0;
  std::int64_t delta = 0;
  friend bool operator==(const AdaptivityEvent&, const AdaptivityEvent&) = default;
};

struct RunOptions {
  std::chrono::nanoseconds inter_arrival{0};  // task i is released at i * inter_arrival
  std::vector<AdaptivityEvent> events;
};

template <class Task, class State, class Result>
class FarmHandle {
 public:
  using Serial = Farm<SerialBehavior<Task, State, Result>>;
  using Partitioned = Farm<PartitionedBehavior<Task, State, Result>>;
  using Accumulator = Farm<AccumulatorBehavior<Task, State, Result>>;
  using Approx = Farm<ApproxBehavior<Task, State>>;
  using Separate = Farm<SeparateBehavior<Task, State, Result>>;
  using Variant = std::variant<std::unique_ptr<Serial>, std::unique_ptr<Partitioned>,
                               std::unique_ptr<Accumulator>, std::unique_ptr<Approx>,
                               std::unique_ptr<Separate>>;

  explicit FarmHandle(Variant farm) : farm_(std::move(farm)) {}

  [[nodiscard]] PatternKind kind() const { return static_cast<PatternKind>(farm_.index()); }

  void feed(Task task) {
    visit([&](auto& f) { f.feed(std::move(task)); });
  }
  void close_input() {
    visit([](auto& f) { f.close_input(); });
  }

  void grow(std::size_t delta) {
    visit([&](auto& f) { adaptivity::grow(f, delta); });
  }
  void shrink(std::size_t delta) {
    visit([&](auto& f) { adaptivity::shrink(f, delta); });
  }
  void merge_workers(std::size_t i, std::size_t j) {
    if (kind() != PatternKind::Accumulator)
      throw FarmError("merge_workers applies to the accumulator pattern only");
    adaptivity::merge_workers(*std::get<std::unique_ptr<Accumulator>>(farm_), i, j);
  }
  std::vector<State> local_states() {
    if (kind() != PatternKind::Accumulator)
      throw FarmError("local_states applies to the accumulator pattern only");
    return adaptivity::local_states(*std::get<std::unique_ptr<Accumulator>>(farm_));
  }

  /// Pushes a global-state update down the feedback path (approx pattern).
  void broadcast(State update) {
    if (kind() != PatternKind::Approx)
      throw FarmError("feedback broadcast applies to the approx pattern only");
    std::get<std::unique_ptr<Approx>>(farm_)->broadcast(std::move(update));
  }

  [[nodiscard]] std::size_t active_workers() const {
    return std::visit([](const auto& f) { return f->active_workers(); }, farm_);
  }
  [[nodiscard]] std::size_t started_workers() const {
    return std::visit([](const auto& f) { return f->started_workers(); }, farm_);
  }

  /// Waits for termination. Throws FarmAborted if an activity failed.
  PatternOutcome<State, Result> join() {
    PatternOutcome<State, Result> out;
    visit([&](auto& f) {
      auto run = f.join();
      const auto& b = f.behavior();
      using B = std::decay_t<decltype(b)>;
      out.metrics = std::move(run.metrics);
      out.rejected = std::move(run.rejected);
      out.counters = b.counters();
      if constexpr (B::kind == PatternKind::Approx || B::kind == PatternKind::Separate) {
        out.states = std::move(run.outputs);
      } else {
        out.results = std::move(run.outputs);
      }
      if constexpr (B::kind == PatternKind::Partitioned) {
        out.final_state = b.final_state();
      } else {
        out.final_state = {b.final_state()};
      }
    });
    return out;
  }

 private:
  template <class Fn>
  void visit(Fn&& fn) {
    std::visit([&](auto& f) { fn(*f); }, farm_);
  }

  Variant farm_;
};

/// Validates the pairing of config and pattern, then starts every activity.
template <class Task, class State, class Result>
FarmHandle<Task, State, Result> build_farm(const FarmConfig& config,
                                           PatternSpec<Task, State, Result> spec) {
  using Handle = FarmHandle<Task, State, Result>;
  config.validate();
  validate_pattern(spec);
  const auto kind = kind_of(spec);
  if (kind == PatternKind::Partitioned) {
    if (config.scheduling != Scheduling::KeyDirected)
      throw FarmError("partitioned pattern requires key-directed scheduling");
  } else if (config.scheduling == Scheduling::KeyDirected) {
    throw FarmError("key-directed scheduling needs the partitioned pattern's routing function");
  }
  if ((kind == PatternKind::Partitioned || kind == PatternKind::Accumulator ||
       kind == PatternKind::Approx) &&
      !config.collector_enabled)
    throw FarmError(std::string(to_string(kind)) + " pattern requires the collector");
  if (kind == PatternKind::Approx && !config.feedback_enabled)
    throw FarmError("approx pattern requires the feedback channel");

  return std::visit(
      [&](auto&& p) -> Handle {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, SerialSpec<Task, State, Result>>) {
          return Handle(std::make_unique<typename Handle::Serial>(
              config, SerialBehavior<Task, State, Result>(std::move(p))));
        } else if constexpr (std::is_same_v<P, PartitionedSpec<Task, State, Result>>) {
          if (config.n_workers > p.partitions)
            throw FarmError("partitioned pattern needs N >= n_workers");
          const auto n = p.partitions;
          return Handle(std::make_unique<typename Handle::Partitioned>(
              config, PartitionedBehavior<Task, State, Result>(std::move(p), config.n_workers),
              PartitionMap(n, config.n_workers)));
        } else if constexpr (std::is_same_v<P, AccumulatorSpec<Task, State, Result>>) {
          return Handle(std::make_unique<typename Handle::Accumulator>(
              config, AccumulatorBehavior<Task, State, Result>(std::move(p))));
        } else if constexpr (std::is_same_v<P, ApproxSpec<Task, State>>) {
          return Handle(std::make_unique<typename Handle::Approx>(
              config, ApproxBehavior<Task, State>(std::move(p))));
        } else {
          return Handle(std::make_unique<typename Handle::Separate>(
              config, SeparateBehavior<Task, State, Result>(std::move(p))));
        }
      },
      std::move(spec));
}

/// Feeds `input` (honouring release times and adaptivity events), closes the
/// stream and waits for the outcome.
template <class Task, class State, class Result>
PatternOutcome<State, Result> run_to_completion(
    FarmHandle<Task, State, Result>& farm, std::type_identity_t<std::span<const Task>> input,
    const RunOptions& options = {}) {
  auto events = options.events;
  std::stable_sort(events.begin(), events.end(),
                   [](const auto& a, const auto& b) { return a.at_task < b.at_task; });
  auto next_event = events.begin();
  auto apply = [&](const AdaptivityEvent& e) {
    if (e.delta > 0) farm.grow(static_cast<std::size_t>(e.delta));
    if (e.delta < 0) farm.shrink(static_cast<std::size_t>(-e.delta));
  };
  const auto start = Clock::now();
  for (std::size_t i = 0; i < input.size(); ++i) {
    for (; next_event != events.end() && next_event->at_task <= i; ++next_event) apply(*next_event);
    if (options.inter_arrival.count() > 0)
      std::this_thread::sleep_until(start + options.inter_arrival * static_cast<std::int64_t>(i));
    farm.feed(input[i]);
  }
  for (; next_event != events.end(); ++next_event) apply(*next_event);
  farm.close_input();
  return farm.join();
}

template <class Task, class State, class Result>
PatternOutcome<State, Result> run_pattern(const FarmConfig& config,
                                          PatternSpec<Task, State, Result> spec,
                                          std::type_identity_t<std::span<const Task>> input,
                                          const RunOptions& options = {}) {
  auto farm = build_farm(config, std::move(spec));
  return run_to_completion(farm, input, options);
}

/// Default topology for each pattern at a given parallelism degree.
inline FarmConfig default_config(PatternKind kind, std::size_t n_workers) {
  FarmConfig c;
  c.n_workers = n_workers;
  switch (kind) {
    case PatternKind::Serial:
      c.preserve_order = true;
      break;
    case PatternKind::Partitioned:
      c.scheduling = Scheduling::KeyDirected;
      break;
    case PatternKind::Approx:
      c.feedback_enabled = true;
      break;
    case PatternKind::Accumulator:
    case PatternKind::Separate:
      break;
  }
  return c;
}

template <class Task, class State, class Result>
PatternOutcome<State, Result> serial_process(SerialSpec<Task, State, Result> spec,
                                             std::type_identity_t<std::span<const Task>> input,
                                             std::size_t n_workers) {
  return run_pattern<Task, State, Result>(default_config(PatternKind::Serial, n_workers),
                                          std::move(spec), input);
}

template <class Task, class State, class Result>
PatternOutcome<State, Result> partitioned_process(
    PartitionedSpec<Task, State, Result> spec, std::type_identity_t<std::span<const Task>> input,
    std::size_t n_workers) {
  return run_pattern<Task, State, Result>(default_config(PatternKind::Partitioned, n_workers),
                                          std::move(spec), input);
}

template <class Task, class State, class Result>
PatternOutcome<State, Result> accumulator_process(
    AccumulatorSpec<Task, State, Result> spec, std::type_identity_t<std::span<const Task>> input,
    std::size_t n_workers) {
  return run_pattern<Task, State, Result>(default_config(PatternKind::Accumulator, n_workers),
                                          std::move(spec), input);
}

/// Result type is unused by the approx pattern; it defaults to State.
template <class Result = void, class Task, class State>
auto approx_process(ApproxSpec<Task, State> spec, std::type_identity_t<std::span<const Task>> input,
                    std::size_t n_workers) {
  using R = std::conditional_t<std::is_void_v<Result>, State, Result>;
  return run_pattern<Task, State, R>(default_config(PatternKind::Approx, n_workers),
                                     std::move(spec), input);
}

template <class Task, class State, class Result>
PatternOutcome<State, Result> separate_process(SeparateSpec<Task, State, Result> spec,
                                               std::type_identity_t<std::span<const Task>> input,
                                               std::size_t n_workers) {
  return run_pattern<Task, State, Result>(default_config(PatternKind::Separate, n_workers),
                                          std::move(spec), input);
}

/// Free-function forms of the handle's adaptivity controls.
template <class Task, class State, class Result>
void grow(FarmHandle<Task, State, Result>& farm, std::size_t delta) {
  farm.grow(delta);
}
template <class Task, class State, class Result>
void shrink(FarmHandle<Task, State, Result>& farm, std::size_t delta) {
  farm.shrink(delta);
}
template <class Task, class State, class Result>
void merge_workers(FarmHandle<Task, State, Result>& farm, std::size_t i, std::size_t j) {
  farm.merge_workers(i, j);
}

}  // namespace statefarm
