#pragma once

// Synthetic workloads: calibrated busy-wait kernels standing in for f, s, g,
// (+), c and s', seeded task streams, and the single-threaded reference
// execution of every pattern.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#if defined(__linux__)
#include <sched.h>
#endif

#include "statefarm/config.hpp"
#include "statefarm/patterns.hpp"

namespace statefarm::workload {

using Micros = std::chrono::duration<double, std::micro>;

// ---------------------------------------------------------------------------
// Busy-wait kernel

namespace detail {
inline std::atomic<std::uint64_t> spin_sink{0};
}

/// xorshift chain: each step depends on the previous one, and the result is
/// published to an atomic so the loop cannot be dropped or collapsed.
[[gnu::noinline]] inline std::uint64_t spin_iterations(std::uint64_t n) {
  std::uint64_t x = 0x9E3779B97F4A7C15ull + n;
  for (std::uint64_t i = 0; i < n; ++i) {
    x ^= x << 13;
    x ^= x >> 7;
    x ^= x << 17;
  }
  detail::spin_sink.store(x, std::memory_order_relaxed);
  return x;
}

inline double thread_cpu_us() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) * 1e6 + static_cast<double>(ts.tv_nsec) / 1e3;
}

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CalibrationCheck {
  double target_us;
  double measured_us;  // median
  bool ok;
};

struct CalibrationTable {
  double iterations_per_us = 0;
  double timer_resolution_ns = 0;
  double cpu_clock_cost_us = 0;  // one read of the thread CPU clock
  std::vector<CalibrationCheck> checks;
};

/// Spins without sleeping or yielding. Short requests run a precomputed
/// iteration count; from kDeadlineFromUs up the loop runs in chunks until the
/// thread's own CPU clock reaches the target, since the iteration rate drifts.
class BusyWait {
 public:
  static constexpr double kDeadlineFromUs = 10.0;
  static constexpr double kChunkUs = 20.0;

  BusyWait() = default;
  explicit BusyWait(double iterations_per_us, double cpu_clock_cost_us = 0)
      : rate_(iterations_per_us), clock_cost_(cpu_clock_cost_us) {}
  explicit BusyWait(const CalibrationTable& table)
      : BusyWait(table.iterations_per_us, table.cpu_clock_cost_us) {}

  void spin(Micros d) const {
    const double us = d.count();
    if (us <= 0 || rate_ <= 0) return;
    if (us < kDeadlineFromUs) {
      spin_iterations(static_cast<std::uint64_t>(std::llround(us * rate_)));
      return;
    }
    const double end = thread_cpu_us() + us - 2 * clock_cost_;
    for (;;) {
      const double left = end - thread_cpu_us();
      if (left <= 0) break;
      spin_iterations(
          std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::min(left, kChunkUs) * rate_)));
    }
  }

  [[nodiscard]] double iterations_per_us() const { return rate_; }

 private:
  double rate_ = 0;
  double clock_cost_ = 0;
};

/// Median wall time of `trials` spins of `target`.
inline double measure_spin(const BusyWait& spinner, Micros target, int trials) {
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(trials));
  for (int i = 0; i < trials; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    spinner.spin(target);
    samples.push_back(Micros(std::chrono::steady_clock::now() - t0).count());
  }
  std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(samples.size() / 2),
                   samples.end());
  return samples[samples.size() / 2];
}

inline double timer_resolution_ns() {
  using clock = std::chrono::steady_clock;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 1000; ++i) {
    const auto a = clock::now();
    auto b = clock::now();
    while (b == a) b = clock::now();
    best = std::min(best, std::chrono::duration<double, std::nano>(b - a).count());
  }
  return best;
}

struct CalibrationOptions {
  double tolerance = 0.05;
  int attempts = 3;
  bool self_check = true;
};

/// Measures the kernel's iteration rate and checks that 100 us and 10 ms
/// requests land within the tolerance. Throws CalibrationError otherwise.
inline CalibrationTable calibrate(const CalibrationOptions& options = {}) {
  CalibrationTable table;
  table.timer_resolution_ns = timer_resolution_ns();
  if (table.timer_resolution_ns > 1000.0)
    throw CalibrationError("steady clock resolution " + std::to_string(table.timer_resolution_ns) +
                           " ns is too coarse for microsecond spins");

  {
    constexpr int reads = 20000;
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reads; ++i) thread_cpu_us();
    table.cpu_clock_cost_us = Micros(std::chrono::steady_clock::now() - t0).count() / reads;
  }

  for (int attempt = 0; attempt < options.attempts; ++attempt) {
    // size one probe to roughly 5 ms, then take the median rate of 7 probes
    std::uint64_t n = 1 << 12;
    for (;;) {
      const auto t0 = std::chrono::steady_clock::now();
      spin_iterations(n);
      if (std::chrono::steady_clock::now() - t0 > std::chrono::milliseconds(5)) break;
      n *= 2;
    }
    std::vector<double> rates;
    for (int i = 0; i < 7; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      spin_iterations(n);
      rates.push_back(static_cast<double>(n) / Micros(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(rates.begin(), rates.end());
    table.iterations_per_us = rates[rates.size() / 2];
    if (!options.self_check) return table;

    const BusyWait spinner(table);
    table.checks.clear();
    bool ok = true;
    for (auto [target, trials] : {std::pair{100.0, 100}, std::pair{10000.0, 7}}) {
      const double measured = measure_spin(spinner, Micros(target), trials);
      const bool within = std::abs(measured - target) <= options.tolerance * target;
      table.checks.push_back({target, measured, within});
      ok = ok && within;
    }
    if (ok) return table;
  }
  std::string detail;
  for (const auto& c : table.checks)
    detail += " target=" + std::to_string(c.target_us) + "us measured=" + std::to_string(c.measured_us) + "us";
  throw CalibrationError("busy-wait calibration outside tolerance:" + detail);
}

// ---------------------------------------------------------------------------
// Task streams

struct SyntheticTask {
  std::uint64_t seq = 0;
  std::size_t key = 0;
  std::int64_t value = 0;
  Micros spin_f{0};
  Micros spin_s{0};

  friend bool operator==(const SyntheticTask&, const SyntheticTask&) = default;
};

struct KeyDistribution {
  enum class Kind { Uniform, Zipf, Constant, TwoKey };
  Kind kind = Kind::Uniform;
  std::size_t partitions = 64;
  double theta = 1.0;          // Zipf exponent
  double hot_fraction = 0.9;   // TwoKey: share of key 0, the rest goes to key N-1

  static KeyDistribution uniform(std::size_t n) { return {Kind::Uniform, n}; }
  static KeyDistribution zipf(std::size_t n, double theta) { return {Kind::Zipf, n, theta}; }
  static KeyDistribution constant(std::size_t n = 1) { return {Kind::Constant, n}; }
  static KeyDistribution two_key(std::size_t n, double hot = 0.9) {
    return {Kind::TwoKey, n, 1.0, hot};
  }
  friend bool operator==(const KeyDistribution&, const KeyDistribution&) = default;
};

enum class ValueOrder { Ascending, Shuffled };

struct StreamSpec {
  std::size_t m = 0;
  Micros t_a{0};
  Micros t_f{0};
  Micros t_s{0};
  KeyDistribution keys{};
  ValueOrder values = ValueOrder::Ascending;  // values are 1..m in this order
  std::uint64_t seed = 42;
};

struct TaskStream {
  std::vector<SyntheticTask> tasks;
  Micros inter_arrival{0};  // task i is released no earlier than i * inter_arrival
};

namespace detail {

__extension__ using uint128 = unsigned __int128;

// Reductions on raw 64-bit draws, so streams only depend on mt19937_64.
inline std::size_t draw_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>((static_cast<uint128>(rng()) * n) >> 64);
}
inline double draw_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

inline TaskStream make_stream(const StreamSpec& spec) {
  if (spec.t_a.count() < 0 || spec.t_f.count() < 0 || spec.t_s.count() < 0)
    throw std::invalid_argument("durations must be >= 0");
  const auto n = std::max<std::size_t>(spec.keys.partitions, 1);
  std::mt19937_64 rng(spec.seed);

  std::vector<double> zipf_cdf;
  if (spec.keys.kind == KeyDistribution::Kind::Zipf) {
    zipf_cdf.resize(n);
    double acc = 0;
    for (std::size_t k = 0; k < n; ++k) zipf_cdf[k] = acc += 1.0 / std::pow(double(k + 1), spec.keys.theta);
    for (auto& c : zipf_cdf) c /= acc;
  }

  TaskStream out;
  out.inter_arrival = spec.t_a;
  out.tasks.resize(spec.m);
  for (std::size_t i = 0; i < spec.m; ++i) {
    auto& t = out.tasks[i];
    t.seq = i;
    t.value = static_cast<std::int64_t>(i) + 1;
    t.spin_f = spec.t_f;
    t.spin_s = spec.t_s;
    switch (spec.keys.kind) {
      case KeyDistribution::Kind::Uniform:
        t.key = detail::draw_index(rng, n);
        break;
      case KeyDistribution::Kind::Zipf: {
        const double u = detail::draw_unit(rng);
        t.key = std::min<std::size_t>(
            static_cast<std::size_t>(std::lower_bound(zipf_cdf.begin(), zipf_cdf.end(), u) -
                                     zipf_cdf.begin()),
            n - 1);
        break;
      }
      case KeyDistribution::Kind::Constant:
        t.key = 0;
        break;
      case KeyDistribution::Kind::TwoKey:
        t.key = detail::draw_unit(rng) < spec.keys.hot_fraction ? 0 : n - 1;
        break;
    }
  }
  if (spec.values == ValueOrder::Shuffled) {
    for (std::size_t i = spec.m; i > 1; --i)
      std::swap(out.tasks[i - 1].value, out.tasks[detail::draw_index(rng, i)].value);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic pattern functions

using SynthState = std::int64_t;
using SynthResult = std::int64_t;
using SynthSpec = PatternSpec<SyntheticTask, SynthState, SynthResult>;

enum class OplusKind { Sum, Max, Min, Xor, Difference };

inline std::string_view to_string(OplusKind k) {
  switch (k) {
    case OplusKind::Sum:
      return "sum";
    case OplusKind::Max:
      return "max";
    case OplusKind::Min:
      return "min";
    case OplusKind::Xor:
      return "xor";
    case OplusKind::Difference:
      return "difference";
  }
  return "?";
}

inline std::optional<OplusKind> oplus_from_string(std::string_view name) {
  for (auto k : {OplusKind::Sum, OplusKind::Max, OplusKind::Min, OplusKind::Xor,
                 OplusKind::Difference}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

/// Identity element of each operator. `Difference` is not a valid
/// accumulator operator (neither associative nor commutative); it exists so
/// the law check has something to reject.
inline SynthState oplus_identity(OplusKind k) {
  switch (k) {
    case OplusKind::Max:
      return std::numeric_limits<SynthState>::min();
    case OplusKind::Min:
      return std::numeric_limits<SynthState>::max();
    default:
      return 0;
  }
}

inline std::function<SynthState(const SynthState&, const SynthState&)> make_oplus(
    OplusKind k, BusyWait spinner = {}, Micros cost = Micros(0)) {
  return [k, spinner, cost](const SynthState& a, const SynthState& b) -> SynthState {
    spinner.spin(cost);
    switch (k) {
      case OplusKind::Sum:
        return a + b;
      case OplusKind::Max:
        return std::max(a, b);
      case OplusKind::Min:
        return std::min(a, b);
      case OplusKind::Xor:
        return a ^ b;
      case OplusKind::Difference:
        return a - b;
    }
    return a;
  };
}

struct SyntheticParams {
  PatternKind pattern = PatternKind::Accumulator;
  std::size_t partitions = 64;
  std::size_t flush_frequency = 1;
  Micros t_s{0};  // cost of (+) and of the separate pattern's s(y, state)
  OplusKind oplus = OplusKind::Sum;
};

inline constexpr std::int64_t kSerialModulus = 1'000'000'007;

/// Synthetic instance of a pattern. Task-level functions spin for the task's
/// spin_f / spin_s; state results stay exact on int64 for the stream sizes used.
///
///   serial       f = s ^ x,  s = (31 s + x) mod p     (order sensitive)
///   partitioned  f = v + x,  v = (31 v + x) mod p, h = key
///   accumulator  f = 2x,     g = x, (+) per OplusKind
///   approx       c = x < s,  s' = x,  s_init = int64 max
///   separate     f = x*x,    s = state + y
inline SynthSpec synthetic_pattern(const SyntheticParams& params, BusyWait spinner) {
  using T = SyntheticTask;
  const auto t_s = params.t_s;
  switch (params.pattern) {
    case PatternKind::Serial:
      return SerialSpec<T, SynthState, SynthResult>{
          [spinner](const T& x, const SynthState& s) {
            spinner.spin(x.spin_f);
            return s ^ x.value;
          },
          [spinner](const T& x, const SynthState& s) {
            spinner.spin(x.spin_s);
            return (s * 31 + x.value) % kSerialModulus;
          },
          0};
    case PatternKind::Partitioned:
      return PartitionedSpec<T, SynthState, SynthResult>{
          [spinner](const T& x, const SynthState& v) {
            spinner.spin(x.spin_f);
            return v + x.value;
          },
          [spinner](const T& x, const SynthState& v) {
            spinner.spin(x.spin_s);
            return (v * 31 + x.value) % kSerialModulus;
          },
          [](const T& x) { return x.key; }, params.partitions, 0};
    case PatternKind::Accumulator:
      return AccumulatorSpec<T, SynthState, SynthResult>{
          [spinner](const T& x, const SynthState&) {
            spinner.spin(x.spin_f);
            return 2 * x.value;
          },
          [](const T& x) { return SynthState{x.value}; },
          make_oplus(params.oplus, spinner, t_s), oplus_identity(params.oplus),
          params.flush_frequency};
    case PatternKind::Approx:
      return ApproxSpec<T, SynthState>{
          [spinner](const T& x, const SynthState& s) {
            spinner.spin(x.spin_f);
            return x.value < s;
          },
          [spinner](const T& x, const SynthState&) {
            spinner.spin(x.spin_s);
            return SynthState{x.value};
          },
          std::less<SynthState>{}, std::numeric_limits<SynthState>::max()};
    case PatternKind::Separate:
      return SeparateSpec<T, SynthState, SynthResult>{
          [spinner](const T& x) {
            spinner.spin(x.spin_f);
            return x.value * x.value;
          },
          [spinner, t_s](const SynthResult& y, const SynthState& s) {
            spinner.spin(t_s);
            return s + y;
          },
          0, {}};
  }
  throw std::invalid_argument("unknown pattern");
}

// ---------------------------------------------------------------------------
// Sequential reference

template <class State, class Result>
struct OracleOutcome {
  std::vector<Result> results;
  std::vector<State> states;       // state stream (approx, separate)
  std::vector<State> final_state;  // one value, or N values when partitioned
  std::size_t rejected = 0;
};

/// Single-threaded, in-order execution of a pattern's defining equations.
template <class Task, class State, class Result>
OracleOutcome<State, Result> sequential_oracle(const PatternSpec<Task, State, Result>& spec,
                                               const std::vector<Task>& input) {
  OracleOutcome<State, Result> out;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, SerialSpec<Task, State, Result>>) {
          State s = p.s0;
          for (const auto& x : input) {
            out.results.push_back(p.f(x, s));
            s = p.s(x, s);
          }
          out.final_state = {s};
        } else if constexpr (std::is_same_v<P, PartitionedSpec<Task, State, Result>>) {
          std::vector<State> v(p.partitions, p.s_init);
          for (const auto& x : input) {
            const auto k = p.h(x);
            if (k >= p.partitions) {
              ++out.rejected;
              continue;
            }
            out.results.push_back(p.f(x, v[k]));
            v[k] = p.s(x, v[k]);
          }
          out.final_state = std::move(v);
        } else if constexpr (std::is_same_v<P, AccumulatorSpec<Task, State, Result>>) {
          State s = p.s_zero;
          for (const auto& x : input) {
            out.results.push_back(p.f(x, s));
            s = p.oplus(p.g(x), s);
          }
          out.final_state = {s};
        } else if constexpr (std::is_same_v<P, ApproxSpec<Task, State>>) {
          State s = p.s_init;
          for (const auto& x : input) {
            if (!p.c(x, s)) continue;
            State candidate = p.s_prime(x, s);
            if (p.less(candidate, s)) {
              s = std::move(candidate);
              out.states.push_back(s);
            }
          }
          out.final_state = {s};
        } else {
          State s = p.s0;
          for (const auto& x : input) {
            s = p.s(p.f(x), s);
            if (!p.emit_cond || p.emit_cond(s)) out.states.push_back(s);
          }
          out.final_state = {s};
        }
      },
      spec);
  return out;
}

// ---------------------------------------------------------------------------
// Host topology

/// Physical cores available to this process (distinct package/core pairs in
/// the affinity mask); falls back to hardware_concurrency.
inline std::size_t physical_core_count() {
#if defined(__linux__)
  cpu_set_t mask;
  CPU_ZERO(&mask);
  if (sched_getaffinity(0, sizeof(mask), &mask) == 0) {
    std::set<std::pair<int, int>> cores;
    for (int cpu = 0; cpu < CPU_SETSIZE; ++cpu) {
      if (!CPU_ISSET(cpu, &mask)) continue;
      const std::filesystem::path base =
          "/sys/devices/system/cpu/cpu" + std::to_string(cpu) + "/topology";
      int package = -1, core = -1;
      std::ifstream(base / "physical_package_id") >> package;
      std::ifstream(base / "core_id") >> core;
      cores.insert(core < 0 ? std::pair{-1, cpu} : std::pair{package, core});
    }
    if (!cores.empty()) return cores.size();
  }
#endif
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace statefarm::workload
