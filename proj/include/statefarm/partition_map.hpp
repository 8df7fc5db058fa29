#pragma once

// Ownership of partitioned state entries and the migration plans that move
// entries between workers when the parallelism degree changes.
//
// Entry i belongs to worker floor(i * n_workers / N): contiguous blocks whose
// sizes differ by at most one. A migration plan is the set difference of two
// such maps, so growing 1 -> 2 over N=4 moves entries {2, 3} from w0 to w1.

#include <cstddef>
#include <vector>

#include "statefarm/config.hpp"

namespace statefarm {

class PartitionMap {
 public:
  PartitionMap(std::size_t partitions, std::size_t n_workers)
      : partitions_(partitions), n_workers_(n_workers) {
    if (partitions == 0) throw FarmError("partition count must be positive");
    if (n_workers == 0) throw FarmError("partition map needs at least one worker");
    if (n_workers > partitions)
      throw FarmError("cannot spread " + std::to_string(partitions) + " partitions over " +
                      std::to_string(n_workers) + " workers");
  }

  [[nodiscard]] std::size_t partitions() const { return partitions_; }
  [[nodiscard]] std::size_t workers() const { return n_workers_; }

  [[nodiscard]] std::size_t owner(std::size_t partition) const {
    return partition * n_workers_ / partitions_;
  }

  /// Partitions owned by `worker`, ascending.
  [[nodiscard]] std::vector<std::size_t> owned_by(std::size_t worker) const {
    std::vector<std::size_t> out;
    // first i with i*n >= worker*N is ceil(worker*N/n)
    const auto first = (worker * partitions_ + n_workers_ - 1) / n_workers_;
    for (auto i = first; i < partitions_ && owner(i) == worker; ++i) out.push_back(i);
    return out;
  }

  friend bool operator==(const PartitionMap&, const PartitionMap&) = default;

 private:
  std::size_t partitions_;
  std::size_t n_workers_;
};

struct PartitionMove {
  std::size_t partition;
  std::size_t from;
  std::size_t to;
  friend bool operator==(const PartitionMove&, const PartitionMove&) = default;
};

/// Entries that change owner. Values travel separately, when the plan runs.
struct MigrationPlan {
  std::size_t partitions = 0;
  std::size_t old_workers = 0;
  std::size_t new_workers = 0;
  std::vector<PartitionMove> moves;  // ascending partition index

  [[nodiscard]] bool empty() const { return moves.empty(); }
  [[nodiscard]] std::size_t size() const { return moves.size(); }
};

inline MigrationPlan plan_migration(const PartitionMap& old_map, std::size_t new_n_workers) {
  if (new_n_workers < 1) throw FarmError("migration target needs at least one worker");
  const PartitionMap next(old_map.partitions(), new_n_workers);
  MigrationPlan plan{old_map.partitions(), old_map.workers(), new_n_workers, {}};
  for (std::size_t i = 0; i < old_map.partitions(); ++i) {
    const auto from = old_map.owner(i);
    const auto to = next.owner(i);
    if (from != to) plan.moves.push_back({i, from, to});
  }
  return plan;
}

}  // namespace statefarm
