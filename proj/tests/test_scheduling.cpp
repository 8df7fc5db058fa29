#include <gtest/gtest.h>

#include <statefarm/partition_map.hpp>
#include <statefarm/scheduling.hpp>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <vector>

using namespace statefarm;

TEST(Scheduling, RoundRobinWraps) {
  EXPECT_EQ(round_robin_next(2, 3), 0u);
  EXPECT_EQ(round_robin_next(0, 3), 1u);
}

TEST(Scheduling, OnDemandPicksLeastOccupiedLowestIndex) {
  const std::vector<std::size_t> occ{3, 0, 3};
  EXPECT_EQ(on_demand_pick(occ), 1u);
  const std::vector<std::size_t> tie{2, 1, 1};
  EXPECT_EQ(on_demand_pick(tie), 1u);
  EXPECT_THROW(on_demand_pick(std::span<const std::size_t>{}), FarmError);
}

TEST(Scheduling, KeyDirectedUsesContiguousOwner) {
  const PartitionMap map(16, 4);
  EXPECT_EQ(key_directed_owner(map, 7), 1u);
}

TEST(PartitionMap, RejectsBadShapes) {
  EXPECT_THROW(PartitionMap(0, 1), FarmError);
  EXPECT_THROW(PartitionMap(4, 0), FarmError);
  EXPECT_THROW(PartitionMap(4, 5), FarmError);
}

// Independent reference: hand out blocks greedily, sizes from the rank.
static std::vector<std::size_t> reference_owners(std::size_t n_parts, std::size_t n_workers) {
  std::vector<std::size_t> owner(n_parts);
  for (std::size_t w = 0; w < n_workers; ++w) {
    // worker w gets [ceil(w N / n), ceil((w+1) N / n))
    const auto lo = (w * n_parts + n_workers - 1) / n_workers;
    const auto hi = ((w + 1) * n_parts + n_workers - 1) / n_workers;
    for (auto i = lo; i < hi; ++i) owner[i] = w;
  }
  return owner;
}

TEST(PartitionMap, OwnershipPropertiesOverAllShapes) {
  for (std::size_t n_parts = 1; n_parts <= 40; ++n_parts) {
    for (std::size_t n = 1; n <= n_parts; ++n) {
      const PartitionMap map(n_parts, n);
      const auto ref = reference_owners(n_parts, n);
      std::vector<std::size_t> sizes(n, 0);
      std::size_t prev = 0;
      for (std::size_t i = 0; i < n_parts; ++i) {
        const auto o = map.owner(i);
        ASSERT_LT(o, n);
        ASSERT_EQ(o, ref[i]) << "N=" << n_parts << " n=" << n << " i=" << i;
        ASSERT_GE(o, prev);  // contiguous blocks
        prev = o;
        ++sizes[o];
      }
      const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
      ASSERT_LE(*hi - *lo, 1u);
      ASSERT_GE(*lo, 1u);
      for (std::size_t w = 0; w < n; ++w)
        for (auto i : map.owned_by(w)) ASSERT_EQ(map.owner(i), w);
    }
  }
}

TEST(MigrationPlan, SpecExamples) {
  EXPECT_TRUE(plan_migration(PartitionMap(4, 2), 2).empty());

  const auto grow = plan_migration(PartitionMap(4, 1), 2);
  const std::vector<PartitionMove> expected{{2, 0, 1}, {3, 0, 1}};
  EXPECT_EQ(grow.moves, expected);

  const PartitionMap old6(6, 3);
  const auto shrink = plan_migration(old6, 2);
  const PartitionMap new6(6, 2);
  std::size_t diff = 0;
  for (std::size_t i = 0; i < 6; ++i) diff += old6.owner(i) != new6.owner(i);
  EXPECT_EQ(shrink.size(), diff);
  for (auto i : old6.owned_by(2)) {
    auto it = std::find_if(shrink.moves.begin(), shrink.moves.end(),
                           [&](const PartitionMove& m) { return m.partition == i; });
    ASSERT_NE(it, shrink.moves.end());
    EXPECT_EQ(it->to, new6.owner(i));
  }
  EXPECT_THROW(plan_migration(PartitionMap(4, 2), 5), FarmError);
}

// Applying a plan to the old assignment reproduces the new map, with no
// partition lost or duplicated.
TEST(MigrationPlan, ApplyingPlanYieldsNewMapProperty) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n_parts = 1 + rng() % 97;
    const std::size_t from = 1 + rng() % n_parts;
    const std::size_t to = 1 + rng() % n_parts;
    const PartitionMap old_map(n_parts, from);
    const auto plan = plan_migration(old_map, to);

    std::map<std::size_t, std::set<std::size_t>> held;
    for (std::size_t i = 0; i < n_parts; ++i) held[old_map.owner(i)].insert(i);
    for (const auto& m : plan.moves) {
      ASSERT_EQ(old_map.owner(m.partition), m.from);
      ASSERT_EQ(held[m.from].erase(m.partition), 1u);
      ASSERT_TRUE(held[m.to].insert(m.partition).second);
    }
    const PartitionMap new_map(n_parts, to);
    std::size_t total = 0;
    for (const auto& [w, parts] : held) {
      for (auto i : parts) ASSERT_EQ(new_map.owner(i), w);
      total += parts.size();
    }
    ASSERT_EQ(total, n_parts);
    std::size_t diff = 0;
    for (std::size_t i = 0; i < n_parts; ++i) diff += old_map.owner(i) != new_map.owner(i);
    ASSERT_EQ(plan.size(), diff);
  }
}
