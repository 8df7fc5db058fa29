#include <gtest/gtest.h>

#include <statefarm/perfmodel.hpp>

#include <cmath>
#include <random>

using namespace statefarm::perfmodel;

TEST(ServiceTime, Branches) {
  EXPECT_DOUBLE_EQ(service_time({0, 100, 0, 0, 4}), 25);
  EXPECT_DOUBLE_EQ(service_time({50, 100, 0, 0, 4}), 50);
  EXPECT_DOUBLE_EQ(service_time({25, 100, 0, 0, 4}), 25);
  EXPECT_THROW(service_time({0, 100, 0, 0, 0}), std::invalid_argument);
  EXPECT_THROW(service_time({-1, 100, 0, 0, 1}), std::invalid_argument);
}

TEST(CompletionTime, Values) {
  const auto t = completion_time({0, 100, 0, 1000, 1});
  EXPECT_DOUBLE_EQ(t.stateful, 100000);
  EXPECT_DOUBLE_EQ(t.stateless, 100000);
  const auto a = completion_time({0, 30, 10, 500, 2});
  const auto b = completion_time({0, 30, 10, 500, 4});
  EXPECT_DOUBLE_EQ(b.stateful, a.stateful / 2);
  EXPECT_DOUBLE_EQ(b.stateless, a.stateless / 2);
  EXPECT_THROW(completion_time({0, 1, 1, -1, 1}), std::invalid_argument);
}

// Ideal completion at n_w = 16 is 1/16 of the single-worker
// value, close to 26.688.
TEST(CompletionTime, SixteenWorkerIdeal) {
  const double at1 = 428.032;
  // m (t_f + t_s) = 428.032 at n_w = 1
  const auto t16 = completion_time({0, 428.032, 0, 1, 16});
  EXPECT_DOUBLE_EQ(t16.stateful, at1 / 16);
  EXPECT_NEAR(t16.stateful, 26.688, 0.07);
}

TEST(SeparateBound, KnownRatios) {
  EXPECT_EQ(speedup_bound_separate(100, 1), 101.0);
  EXPECT_EQ(speedup_bound_separate(10, 1), 11.0);
  EXPECT_EQ(speedup_bound_separate(5, 1), 6.0);
  EXPECT_EQ(speedup_bound_separate(0, 3), 1.0);
  EXPECT_EQ(speedup_bound_separate(5, 0), kUnbounded);
}

TEST(SeparatePrediction, Values) {
  EXPECT_EQ(predicted_speedup_separate(7, 3, 1), 1.0);
  EXPECT_DOUBLE_EQ(predicted_speedup_separate(10, 1, 16), 176.0 / 26.0);
  EXPECT_NEAR(predicted_speedup_separate(5, 1, 1e9), 6.0, 1e-6);
  EXPECT_THROW(predicted_speedup_separate(0, 0, 2), std::invalid_argument);
  EXPECT_THROW(predicted_speedup_separate(1, 1, 0.5), std::invalid_argument);
}

// Monotone in n_w and bounded by t_f/t_s + 1, for random parameters.
TEST(SeparatePrediction, MonotoneAndBoundedProperty) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> time(0.001, 1000.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const double tf = time(rng), ts = time(rng);
    double prev = 0;
    for (double n = 1; n <= 64; n *= 2) {
      const double p = predicted_speedup_separate(tf, ts, n);
      ASSERT_GE(p, prev * (1 - 1e-12));
      ASSERT_LE(p, speedup_bound_separate(tf, ts) * (1 + 1e-12));
      ASSERT_LE(p, n * (1 + 1e-12));
      prev = p;
    }
  }
}

TEST(FlushFrequency, Values) {
  EXPECT_EQ(min_flush_frequency(2, 1, 8), 16.0);
  EXPECT_EQ(min_flush_frequency(50, 50, 1), 1.0);
  EXPECT_EQ(min_flush_frequency(5, 0, 8), 0.0);
  // linear in n_w
  EXPECT_DOUBLE_EQ(min_flush_frequency(2, 1, 16), 2 * min_flush_frequency(2, 1, 8));
}
