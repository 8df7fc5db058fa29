#include <gtest/gtest.h>

#include <statefarm/workload.hpp>

#include <algorithm>
#include <chrono>
#include <map>
#include <set>

using namespace statefarm;
using namespace statefarm::workload;

namespace {

// Calibration is a few hundred milliseconds; do it once.
const CalibrationTable& table() {
  static const CalibrationTable t = calibrate();
  return t;
}

}  // namespace

TEST(Calibration, TableIsSane) {
  const auto& t = table();
  EXPECT_GT(t.iterations_per_us, 0);
  EXPECT_LE(t.timer_resolution_ns, 1000);
  ASSERT_EQ(t.checks.size(), 2u);
  for (const auto& c : t.checks) EXPECT_TRUE(c.ok) << c.target_us << " -> " << c.measured_us;
}

TEST(Calibration, HundredMicrosecondsWithinFivePercent) {
  const BusyWait spin(table());
  const double median = measure_spin(spin, Micros(100), 100);
  EXPECT_GE(median, 95.0);
  EXPECT_LE(median, 105.0);
}

TEST(Calibration, TenMillisecondsWithinFivePercent) {
  const BusyWait spin(table());
  const double median = measure_spin(spin, Micros(10000), 5);
  EXPECT_NEAR(median, 10000.0, 500.0);
}

TEST(Calibration, ZeroIsNoOp) {
  const BusyWait spin(table());
  EXPECT_LT(measure_spin(spin, Micros(0), 101), 1.0);
}

// The spin occupies a core: thread CPU time tracks wall time.
TEST(BusyWait, ConsumesCpuNotSleep) {
  const BusyWait spin(table());
  const double cpu0 = thread_cpu_us();
  const auto t0 = std::chrono::steady_clock::now();
  spin.spin(Micros(20000));
  const double wall = Micros(std::chrono::steady_clock::now() - t0).count();
  const double cpu = thread_cpu_us() - cpu0;
  EXPECT_GT(cpu, 0.9 * wall);
}

TEST(Stream, ShapeAndTimings) {
  const auto s = make_stream({.m = 100, .t_a = Micros(3), .t_f = Micros(7), .t_s = Micros(2)});
  ASSERT_EQ(s.tasks.size(), 100u);
  EXPECT_EQ(s.inter_arrival, Micros(3));
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_EQ(s.tasks[i].seq, i);
    EXPECT_EQ(s.tasks[i].value, static_cast<std::int64_t>(i) + 1);
    EXPECT_EQ(s.tasks[i].spin_f, Micros(7));
    EXPECT_EQ(s.tasks[i].spin_s, Micros(2));
  }
  EXPECT_TRUE(make_stream({.m = 0}).tasks.empty());
  EXPECT_THROW(make_stream({.m = 1, .t_f = Micros(-1)}), std::invalid_argument);
}

TEST(Stream, ReproducibleForSeed) {
  for (auto keys : {KeyDistribution::uniform(16), KeyDistribution::zipf(32, 1.1),
                    KeyDistribution::two_key(8)}) {
    StreamSpec spec{.m = 5000, .keys = keys, .values = ValueOrder::Shuffled, .seed = 9};
    EXPECT_EQ(make_stream(spec).tasks, make_stream(spec).tasks);
    auto other = spec;
    other.seed = 10;
    EXPECT_NE(make_stream(spec).tasks, make_stream(other).tasks);
  }
}

TEST(Stream, ConstantKeyHitsOnePartition) {
  const auto s = make_stream({.m = 1000, .keys = KeyDistribution::constant(16)});
  for (const auto& t : s.tasks) ASSERT_EQ(t.key, 0u);
}

TEST(Stream, UniformCountsAreBalanced) {
  const auto s = make_stream({.m = 16000, .keys = KeyDistribution::uniform(16)});
  std::map<std::size_t, int> counts;
  for (const auto& t : s.tasks) ++counts[t.key];
  ASSERT_EQ(counts.size(), 16u);
  // 4.5 standard deviations of Binomial(16000, 1/16)
  for (auto [k, c] : counts) EXPECT_NEAR(c, 1000, 140) << k;
}

TEST(Stream, ZipfFavoursLowKeys) {
  const auto s = make_stream({.m = 20000, .keys = KeyDistribution::zipf(16, 1.2)});
  std::vector<int> counts(16, 0);
  for (const auto& t : s.tasks) ++counts[t.key];
  EXPECT_GT(counts[0], counts[1]);
  EXPECT_GT(counts[1], counts[4]);
  EXPECT_GT(counts[4], counts[15]);
  // expected share of key 0 is 1 / H(16, 1.2)
  double h = 0;
  for (int k = 1; k <= 16; ++k) h += 1.0 / std::pow(k, 1.2);
  EXPECT_NEAR(counts[0] / 20000.0, 1.0 / h, 0.02);
}

TEST(Stream, TwoKeyIsNinetyTen) {
  const auto s = make_stream({.m = 10000, .keys = KeyDistribution::two_key(64, 0.9)});
  int hot = 0, cold = 0;
  for (const auto& t : s.tasks) {
    if (t.key == 0) ++hot;
    else if (t.key == 63) ++cold;
  }
  EXPECT_EQ(hot + cold, 10000);
  EXPECT_NEAR(hot / 10000.0, 0.9, 0.015);
}

TEST(Stream, ShuffledValuesArePermutation) {
  const auto s = make_stream({.m = 1000, .values = ValueOrder::Shuffled});
  std::vector<std::int64_t> v;
  for (const auto& t : s.tasks) v.push_back(t.value);
  EXPECT_FALSE(std::is_sorted(v.begin(), v.end()));
  std::sort(v.begin(), v.end());
  for (std::size_t i = 0; i < v.size(); ++i) ASSERT_EQ(v[i], static_cast<std::int64_t>(i) + 1);
}

TEST(Oracle, Deterministic) {
  const auto s = make_stream({.m = 2000, .keys = KeyDistribution::zipf(16, 1.0), .values = ValueOrder::Shuffled});
  for (auto k : {PatternKind::Serial, PatternKind::Partitioned, PatternKind::Accumulator,
                 PatternKind::Approx, PatternKind::Separate}) {
    SyntheticParams p;
    p.pattern = k;
    p.partitions = 16;
    const auto a = sequential_oracle(synthetic_pattern(p, {}), s.tasks);
    const auto b = sequential_oracle(synthetic_pattern(p, {}), s.tasks);
    EXPECT_EQ(a.results, b.results);
    EXPECT_EQ(a.states, b.states);
    EXPECT_EQ(a.final_state, b.final_state);
  }
}

TEST(Oracle, SyntheticClosedForms) {
  const auto s = make_stream({.m = 10000});
  SyntheticParams p;
  p.pattern = PatternKind::Accumulator;
  EXPECT_EQ(sequential_oracle(synthetic_pattern(p, {}), s.tasks).final_state,
            std::vector<SynthState>{50005000});
  p.pattern = PatternKind::Separate;
  // sum of squares 1..n = n(n+1)(2n+1)/6
  EXPECT_EQ(sequential_oracle(synthetic_pattern(p, {}), s.tasks).final_state,
            std::vector<SynthState>{10000LL * 10001 * 20001 / 6});
  p.pattern = PatternKind::Approx;
  const auto shuffled = make_stream({.m = 500, .values = ValueOrder::Shuffled});
  const auto o = sequential_oracle(synthetic_pattern(p, {}), shuffled.tasks);
  std::vector<SynthState> prefix_min;
  SynthState best = std::numeric_limits<SynthState>::max();
  for (const auto& t : shuffled.tasks)
    if (t.value < best) prefix_min.push_back(best = t.value);
  EXPECT_EQ(o.states, prefix_min);
  EXPECT_EQ(o.final_state, std::vector<SynthState>{1});
}

TEST(Oplus, IdentitiesAndDifference) {
  for (auto k : {OplusKind::Sum, OplusKind::Max, OplusKind::Min, OplusKind::Xor}) {
    const auto op = make_oplus(k);
    for (SynthState v : {-5LL, 0LL, 17LL}) EXPECT_EQ(op(v, oplus_identity(k)), v) << to_string(k);
    EXPECT_EQ(oplus_from_string(to_string(k)), k);
  }
  const auto diff = make_oplus(OplusKind::Difference);
  EXPECT_NE(diff(3, 5), diff(5, 3));
}

TEST(Topology, AtLeastOneCore) { EXPECT_GE(physical_core_count(), 1u); }
