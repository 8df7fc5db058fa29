#pragma once

// Emitter scheduling policies as pure functions over the worker positions of
// the current active set.

#include <algorithm>
#include <cstddef>
#include <span>

#include "statefarm/config.hpp"
#include "statefarm/partition_map.hpp"

namespace statefarm {

inline std::size_t round_robin_next(std::size_t previous, std::size_t n_workers) {
  return (previous + 1) % n_workers;
}

/// Least-occupied input queue, lowest index on ties.
inline std::size_t on_demand_pick(std::span<const std::size_t> occupancy) {
  if (occupancy.empty()) throw FarmError("no worker accepts input");
  return static_cast<std::size_t>(std::min_element(occupancy.begin(), occupancy.end()) -
                                  occupancy.begin());
}

inline std::size_t key_directed_owner(const PartitionMap& map, std::size_t key) {
  return map.owner(key);
}

}  // namespace statefarm
