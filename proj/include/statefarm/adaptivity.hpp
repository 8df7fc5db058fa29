#pragma once

// Changing the parallelism degree of a running farm.
//
// Every request runs as a control closure on the emitter, in stream order, so
// no task is scheduled while a request is in progress. Requests are issued
// from the controller and complete before the call returns.
//
//   grow    Partitioned: new workers start empty, then the migration plan for
//           the wider map moves entries in. Accumulator: new locals at s_zero.
//           Approx: new locals at the latest global value that went through
//           the feedback path (or s_init, see FarmConfig). Others: attach.
//   shrink  The last `delta` workers leave. Partitioned entries are migrated
//           first; every departing worker drains its queue and runs retire()
//           (the accumulator flushes its residual local state there).
//   merge   Accumulator only: worker j surrenders its local value to worker i
//           and leaves without sending anything to the collector.
//
// Partition quiescence: extracting an entry is a closure queued behind every
// task already routed to its owner, and the emitter waits for it before
// installing the entry elsewhere and switching the map. Tasks for a moving
// key therefore always see exactly one holder.

#include <cstddef>
#include <future>
#include <map>
#include <vector>

#include "statefarm/farm.hpp"
#include "statefarm/partition_map.hpp"
#include "statefarm/patterns.hpp"

namespace statefarm::adaptivity {

namespace detail {

template <class B>
inline constexpr bool is_partitioned = B::kind == PatternKind::Partitioned;
template <class B>
inline constexpr bool is_accumulator = B::kind == PatternKind::Accumulator;
template <class B>
inline constexpr bool is_approx = B::kind == PatternKind::Approx;

// Runs a migration plan; returns the number of entries moved.
template <class B>
std::size_t execute_plan(typename Farm<B>::EmitterView& em, const MigrationPlan& plan) {
  using Entry = typename B::Entry;
  std::map<std::size_t, std::vector<std::size_t>> outgoing;  // source -> partitions
  for (const auto& m : plan.moves) outgoing[m.from].push_back(m.partition);

  std::map<std::size_t, std::vector<Entry>> incoming;  // destination -> entries
  std::map<std::size_t, std::size_t> destination;
  for (const auto& m : plan.moves) destination[m.partition] = m.to;

  for (auto& [source, parts] : outgoing) {
    auto fut = em.post(source, [parts](typename B::worker_state& slice, auto&) {
      return B::extract(slice, parts);
    });
    for (auto& e : em.await(fut)) incoming[destination.at(e.partition)].push_back(std::move(e));
  }
  for (auto& [target, entries] : incoming) {
    em.post(target, [entries](typename B::worker_state& slice, auto&) mutable {
      B::install(slice, std::move(entries));
    });
  }
  return plan.size();
}

}  // namespace detail

template <class B>
void grow(Farm<B>& farm, std::size_t delta) {
  if (delta == 0) return;
  auto fut = farm.control([delta](typename Farm<B>::EmitterView& em) {
    auto& behavior = em.behavior();
    const auto target = em.worker_count() + delta;
    if constexpr (detail::is_partitioned<B>) {
      const auto& old_map = *em.partition_map();
      if (target > old_map.partitions())
        throw FarmError("cannot grow to " + std::to_string(target) + " workers over " +
                        std::to_string(old_map.partitions()) + " partitions");
      const auto plan = plan_migration(old_map, target);
      for (std::size_t i = 0; i < delta; ++i) em.add_worker({});
      behavior.record_migration(detail::execute_plan<B>(em, plan));
      em.set_partition_map(PartitionMap(old_map.partitions(), target));
    } else if constexpr (detail::is_accumulator<B>) {
      for (std::size_t i = 0; i < delta; ++i) em.add_worker(behavior.zero());
    } else if constexpr (detail::is_approx<B>) {
      const auto& latest = em.latest_feedback();
      const bool catch_up = em.config().grow_from_initial_state || !latest;
      for (std::size_t i = 0; i < delta; ++i)
        em.add_worker({catch_up ? behavior.initial() : *latest});
    } else {
      for (std::size_t i = 0; i < delta; ++i) em.add_worker({});
    }
  });
  farm.await(fut);
}

template <class B>
void shrink(Farm<B>& farm, std::size_t delta) {
  if (delta == 0) return;
  auto fut = farm.control([delta](typename Farm<B>::EmitterView& em) {
    const auto n = em.worker_count();
    if (delta >= n)
      throw FarmError("cannot shrink " + std::to_string(n) + " workers by " +
                      std::to_string(delta));
    const auto target = n - delta;
    if constexpr (detail::is_partitioned<B>) {
      const auto& old_map = *em.partition_map();
      const auto plan = plan_migration(old_map, target);
      em.behavior().record_migration(detail::execute_plan<B>(em, plan));
      em.set_partition_map(PartitionMap(old_map.partitions(), target));
    }
    while (em.worker_count() > target) em.retire(em.worker_count() - 1);
  });
  farm.await(fut);
}

/// Accumulator only: worker `j` folds into worker `i` and leaves.
template <class B>
void merge_workers(Farm<B>& farm, std::size_t i, std::size_t j) {
  if constexpr (!detail::is_accumulator<B>) {
    (void)farm;
    (void)i;
    (void)j;
    throw FarmError("merge_workers applies to the accumulator pattern only");
  } else {
    if (i == j) throw FarmError("cannot merge a worker with itself");
    auto fut = farm.control([i, j](typename Farm<B>::EmitterView& em) {
      const auto n = em.worker_count();
      if (i >= n || j >= n) throw FarmError("merge_workers: worker index out of range");
      auto& behavior = em.behavior();
      const auto zero = behavior.zero();
      auto surrendered = em.post(j, [zero](typename B::worker_state& local, auto&) {
        return std::exchange(local, zero);
      });
      const auto other = em.await(surrendered);
      em.post(i, [other, behavior](typename B::worker_state& local, auto&) {
        behavior.absorb(local, other);
      });
      em.retire(j);
      behavior.record_merge();
    });
    farm.await(fut);
  }
}

/// Accumulator only: current local value of every active worker, by position.
template <class B>
auto local_states(Farm<B>& farm) {
  static_assert(detail::is_accumulator<B>, "local_states applies to the accumulator pattern");
  using State = decltype(std::declval<typename B::worker_state>().value);
  auto fut = farm.control([](typename Farm<B>::EmitterView& em) {
    std::vector<std::future<State>> pending;
    for (std::size_t p = 0; p < em.worker_count(); ++p)
      pending.push_back(
          em.post(p, [](typename B::worker_state& local, auto&) { return local.value; }));
    std::vector<State> out;
    for (auto& f : pending) out.push_back(em.await(f));
    return out;
  });
  return farm.await(fut);
}

}  // namespace statefarm::adaptivity
