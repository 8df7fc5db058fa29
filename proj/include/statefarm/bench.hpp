#pragma once

// Experiment harness: spec files, parameter sweeps, CSV output and the
// correctness gates that run before any timing.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "statefarm/farm_handle.hpp"
#include "statefarm/patterns.hpp"
#include "statefarm/perfmodel.hpp"
#include "statefarm/workload.hpp"

namespace statefarm::bench {

using workload::KeyDistribution;
using workload::OplusKind;

/// Malformed experiment spec or invalid parameters.
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A correctness gate failed (operator laws or oracle mismatch).
class VerificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Number formatting

inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[400];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return std::string(buf, end);
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  for (;;) {
    const auto p = s.find(sep);
    out.push_back(trim(s.substr(0, p)));
    if (p == std::string_view::npos) break;
    s.remove_prefix(p + 1);
  }
  return out;
}

template <class T>
T parse_number(std::string_view s, std::string_view what) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  T v{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || end != s.data() + s.size())
    throw SpecError("invalid " + std::string(what) + ": '" + std::string(s) + "'");
  return v;
}

template <class T>
std::vector<T> parse_list(std::string_view s, std::string_view what) {
  std::vector<T> out;
  if (trim(s).empty()) return out;
  for (auto item : split(s, ',')) out.push_back(parse_number<T>(item, what));
  return out;
}

template <class T>
std::string join_list(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      char buf[64];
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v[i]);
      out.append(buf, end);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment spec

struct ExperimentSpec {
  PatternKind pattern = PatternKind::Accumulator;
  std::size_t tasks = 10000;
  double t_f = 100;  // us; ignored when `ratios` is non-empty
  double t_s = 1;    // us
  double t_a = 0;    // us
  std::vector<double> ratios;  // t_f / t_s; each gives t_f = ratio * t_s
  std::vector<std::size_t> degrees{1};
  std::vector<std::size_t> flush_freqs{1};  // accumulator only
  int repetitions = 3;
  std::uint64_t seed = 42;
  std::vector<AdaptivityEvent> events;
  std::size_t partitions = 64;
  KeyDistribution keys = KeyDistribution::uniform(64);
  OplusKind oplus = OplusKind::Sum;
  bool pin = false;
  std::size_t verify_prefix = 512;  // tasks replayed against the oracle before timing

  void validate() const {
    if (degrees.empty()) throw SpecError("degrees must not be empty");
    if (flush_freqs.empty()) throw SpecError("flush_freqs must not be empty");
    if (repetitions < 1) throw SpecError("repetitions must be >= 1");
    if (t_f < 0 || t_s < 0 || t_a < 0) throw SpecError("durations must be >= 0");
    for (auto r : ratios)
      if (!(r >= 0)) throw SpecError("ratios must be >= 0");
    for (auto d : degrees)
      if (d < 1) throw SpecError("degrees must be >= 1");
    for (auto f : flush_freqs)
      if (f < 1) throw SpecError("flush frequencies must be >= 1");
    if (partitions < 1) throw SpecError("partitions must be >= 1");
    if (pattern == PatternKind::Partitioned)
      for (auto d : degrees)
        if (d > partitions) throw SpecError("partitioned degree exceeds partition count");
  }

  /// (t_f, t_s) pairs swept by this spec.
  [[nodiscard]] std::vector<std::pair<double, double>> timings() const {
    if (ratios.empty()) return {{t_f, t_s}};
    std::vector<std::pair<double, double>> out;
    for (auto r : ratios) out.emplace_back(r * t_s, t_s);
    return out;
  }

  friend bool operator==(const ExperimentSpec&, const ExperimentSpec&) = default;
};

inline std::string_view to_string(KeyDistribution::Kind k) {
  switch (k) {
    case KeyDistribution::Kind::Uniform:
      return "uniform";
    case KeyDistribution::Kind::Zipf:
      return "zipf";
    case KeyDistribution::Kind::Constant:
      return "constant";
    case KeyDistribution::Kind::TwoKey:
      return "two_key";
  }
  return "?";
}

inline std::vector<AdaptivityEvent> parse_events(std::string_view s) {
  std::vector<AdaptivityEvent> out;
  if (trim(s).empty()) return out;
  for (auto item : split(s, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string_view::npos)
      throw SpecError("event must look like <task>:<+delta|-delta>, got '" + std::string(item) + "'");
    AdaptivityEvent e;
    e.at_task = parse_number<std::uint64_t>(item.substr(0, colon), "event task");
    e.delta = parse_number<std::int64_t>(item.substr(colon + 1), "event delta");
    if (e.delta == 0) throw SpecError("event delta must be non-zero");
    out.push_back(e);
  }
  return out;
}

inline std::string format_events(const std::vector<AdaptivityEvent>& events) {
  std::string out;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(events[i].at_task) + ':' + (events[i].delta > 0 ? "+" : "") +
           std::to_string(events[i].delta);
  }
  return out;
}

/// Flat `key = value` text, one entry per line, lists comma separated,
/// `#` starts a comment.
inline ExperimentSpec parse_spec(std::string_view text) {
  ExperimentSpec spec;
  std::optional<std::size_t> key_partitions;
  int line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    auto line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw SpecError("line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    try {
      if (key == "pattern") {
        auto k = pattern_from_string(value);
        if (!k) throw SpecError("unknown pattern '" + std::string(value) + "'");
        spec.pattern = *k;
      } else if (key == "tasks") {
        spec.tasks = parse_number<std::size_t>(value, "tasks");
      } else if (key == "tf") {
        spec.t_f = parse_number<double>(value, "tf");
      } else if (key == "ts") {
        spec.t_s = parse_number<double>(value, "ts");
      } else if (key == "ta") {
        spec.t_a = parse_number<double>(value, "ta");
      } else if (key == "ratios") {
        spec.ratios = parse_list<double>(value, "ratio");
      } else if (key == "degrees") {
        spec.degrees = parse_list<std::size_t>(value, "degree");
      } else if (key == "flush_freqs") {
        spec.flush_freqs = parse_list<std::size_t>(value, "flush frequency");
      } else if (key == "repetitions") {
        spec.repetitions = parse_number<int>(value, "repetitions");
      } else if (key == "seed") {
        spec.seed = parse_number<std::uint64_t>(value, "seed");
      } else if (key == "events") {
        spec.events = parse_events(value);
      } else if (key == "partitions") {
        spec.partitions = parse_number<std::size_t>(value, "partitions");
      } else if (key == "keys") {
        if (value == "uniform")
          spec.keys.kind = KeyDistribution::Kind::Uniform;
        else if (value == "zipf")
          spec.keys.kind = KeyDistribution::Kind::Zipf;
        else if (value == "constant")
          spec.keys.kind = KeyDistribution::Kind::Constant;
        else if (value == "two_key")
          spec.keys.kind = KeyDistribution::Kind::TwoKey;
        else
          throw SpecError("unknown key distribution '" + std::string(value) + "'");
      } else if (key == "key_partitions") {
        key_partitions = parse_number<std::size_t>(value, "key_partitions");
      } else if (key == "theta") {
        spec.keys.theta = parse_number<double>(value, "theta");
      } else if (key == "hot_fraction") {
        spec.keys.hot_fraction = parse_number<double>(value, "hot_fraction");
      } else if (key == "oplus") {
        auto k = workload::oplus_from_string(value);
        if (!k) throw SpecError("unknown operator '" + std::string(value) + "'");
        spec.oplus = *k;
      } else if (key == "pin") {
        if (value != "true" && value != "false") throw SpecError("pin must be true or false");
        spec.pin = value == "true";
      } else if (key == "verify_prefix") {
        spec.verify_prefix = parse_number<std::size_t>(value, "verify_prefix");
      } else {
        throw SpecError("unknown key '" + std::string(key) + "'");
      }
    } catch (const SpecError& e) {
      throw SpecError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  // keys are drawn over the pattern's partitions unless told otherwise
  spec.keys.partitions = key_partitions.value_or(spec.partitions);
  spec.validate();
  return spec;
}

inline std::string serialize_spec(const ExperimentSpec& spec) {
  std::ostringstream out;
  out << "pattern = " << to_string(spec.pattern) << '\n'
      << "tasks = " << spec.tasks << '\n'
      << "tf = " << join_list(std::vector{spec.t_f}) << '\n'
      << "ts = " << join_list(std::vector{spec.t_s}) << '\n'
      << "ta = " << join_list(std::vector{spec.t_a}) << '\n';
  if (!spec.ratios.empty()) out << "ratios = " << join_list(spec.ratios) << '\n';
  out << "degrees = " << join_list(spec.degrees) << '\n'
      << "flush_freqs = " << join_list(spec.flush_freqs) << '\n'
      << "repetitions = " << spec.repetitions << '\n'
      << "seed = " << spec.seed << '\n';
  if (!spec.events.empty()) out << "events = " << format_events(spec.events) << '\n';
  out << "partitions = " << spec.partitions << '\n'
      << "keys = " << to_string(spec.keys.kind) << '\n'
      << "key_partitions = " << spec.keys.partitions << '\n'
      << "theta = " << join_list(std::vector{spec.keys.theta}) << '\n'
      << "hot_fraction = " << join_list(std::vector{spec.keys.hot_fraction}) << '\n'
      << "oplus = " << workload::to_string(spec.oplus) << '\n'
      << "pin = " << (spec.pin ? "true" : "false") << '\n'
      << "verify_prefix = " << spec.verify_prefix << '\n';
  return out.str();
}

inline ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open spec file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_spec(buf.str());
}

// ---------------------------------------------------------------------------
// Records and CSV

struct MetricsRecord {
  PatternKind pattern = PatternKind::Accumulator;
  std::size_t n_w = 1;
  std::size_t flush_freq = 1;
  double t_f_us = 0;
  double t_s_us = 0;
  double measured_us = 0;  // median over repetitions
  double ideal_us = 0;
  double speedup = 0;      // T(1) / T(n_w), both measured
  double predicted_speedup = 0;
  double bound = 0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

inline constexpr std::string_view kCsvHeader =
    "pattern,n_w,flush_freq,t_f_us,t_s_us,measured_us,ideal_us,speedup,predicted_speedup,bound";

inline void write_csv(const std::vector<MetricsRecord>& records, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << to_string(r.pattern) << ',' << r.n_w << ',' << r.flush_freq << ','
        << format_number(r.t_f_us) << ',' << format_number(r.t_s_us) << ','
        << format_number(r.measured_us) << ',' << format_number(r.ideal_us) << ','
        << format_number(r.speedup) << ',' << format_number(r.predicted_speedup) << ','
        << format_number(r.bound) << '\n';
  }
}

inline void emit_csv(const std::vector<MetricsRecord>& records, const std::string& path) {
  if (records.empty()) throw std::invalid_argument("no records to write");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_csv(records, out);
  out.flush();
  if (!out) throw std::runtime_error("error writing '" + path + "'");
}

inline std::vector<MetricsRecord> parse_csv(std::string_view text) {
  auto lines = split(text, '\n');
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines.front() != kCsvHeader) throw SpecError("missing or wrong CSV header");
  std::vector<MetricsRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    if (f.size() != 10) throw SpecError("CSV row " + std::to_string(i) + " has " +
                                        std::to_string(f.size()) + " fields");
    MetricsRecord r;
    auto k = pattern_from_string(f[0]);
    if (!k) throw SpecError("unknown pattern in CSV: '" + std::string(f[0]) + "'");
    r.pattern = *k;
    r.n_w = parse_number<std::size_t>(f[1], "n_w");
    r.flush_freq = parse_number<std::size_t>(f[2], "flush_freq");
    r.t_f_us = parse_number<double>(f[3], "t_f_us");
    r.t_s_us = parse_number<double>(f[4], "t_s_us");
    r.measured_us = parse_number<double>(f[5], "measured_us");
    r.ideal_us = parse_number<double>(f[6], "ideal_us");
    r.speedup = parse_number<double>(f[7], "speedup");
    r.predicted_speedup = parse_number<double>(f[8], "predicted_speedup");
    r.bound = parse_number<double>(f[9], "bound");
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model columns

/// ideal_us, predicted_speedup and bound for one cell.
struct ModelColumns {
  double ideal_us;
  double predicted_speedup;
  double bound;
};

inline ModelColumns model_columns(PatternKind pattern, double m, double t_f, double t_s,
                                  double t_a, std::size_t n_w) {
  const perfmodel::CostParams p{t_a, t_f, t_s, m, static_cast<double>(n_w)};
  const double n = static_cast<double>(n_w);
  ModelColumns c{perfmodel::completion_time(p).stateful, n, n};
  switch (pattern) {
    case PatternKind::Serial:
      c.predicted_speedup = 1;
      c.bound = 1;
      break;
    case PatternKind::Separate:
      c.predicted_speedup =
          t_f + t_s > 0 ? perfmodel::predicted_speedup_separate(t_f, t_s, n) : n;
      c.bound = perfmodel::speedup_bound_separate(t_f, t_s);
      break;
    default:
      break;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Operator laws

struct LawReport {
  std::size_t triples = 0;
  std::size_t associativity_violations = 0;
  std::size_t commutativity_violations = 0;
  std::size_t identity_violations = 0;
  std::string first_counterexample;

  [[nodiscard]] bool ok() const {
    return associativity_violations == 0 && commutativity_violations == 0 &&
           identity_violations == 0;
  }
};

/// Random triples from a seeded generator, values in [-2^40, 2^40] so sums
/// of three never overflow.
template <class Op>
LawReport check_oplus_laws(const Op& oplus, std::int64_t zero, std::size_t triples = 10000,
                           std::uint64_t seed = 42) {
  std::mt19937_64 rng(seed);
  constexpr std::int64_t span = std::int64_t{1} << 40;
  auto draw = [&] {
    return static_cast<std::int64_t>(
               (static_cast<workload::detail::uint128>(rng()) * (2 * span + 1)) >> 64) -
           span;
  };
  LawReport r;
  r.triples = triples;
  auto note = [&](std::string_view law, std::int64_t a, std::int64_t b, std::int64_t c) {
    if (r.first_counterexample.empty())
      r.first_counterexample = std::string(law) + " fails for (" + std::to_string(a) + ", " +
                               std::to_string(b) + ", " + std::to_string(c) + ")";
  };
  for (std::size_t i = 0; i < triples; ++i) {
    const auto a = draw(), b = draw(), c = draw();
    if (oplus(oplus(a, b), c) != oplus(a, oplus(b, c))) {
      ++r.associativity_violations;
      note("associativity", a, b, c);
    }
    if (oplus(a, b) != oplus(b, a)) {
      ++r.commutativity_violations;
      note("commutativity", a, b, c);
    }
    if (oplus(a, zero) != a || oplus(zero, a) != a) {
      ++r.identity_violations;
      note("identity", a, b, c);
    }
  }
  return r;
}

inline LawReport check_oplus_laws(OplusKind kind, std::size_t triples = 10000,
                                  std::uint64_t seed = 42) {
  return check_oplus_laws(workload::make_oplus(kind), workload::oplus_identity(kind), triples,
                          seed);
}

// ---------------------------------------------------------------------------
// Oracle comparison

struct Comparison {
  bool ok = true;
  std::string detail;
};

/// Compares a parallel outcome with the sequential reference. Checks the
/// final state for every pattern, the full output sequence for serial, and
/// for approx that the emitted stream strictly decreases and ends at the
/// oracle's final value.
template <class State, class Result>
Comparison compare_with_oracle(PatternKind kind, const PatternOutcome<State, Result>& got,
                               const workload::OracleOutcome<State, Result>& want) {
  Comparison c;
  auto fail = [&](std::string why) {
    if (c.ok) c.detail = std::move(why);
    c.ok = false;
  };
  if (got.final_state != want.final_state) fail("final state differs from the oracle");
  if (kind == PatternKind::Serial && got.result_values() != want.results)
    fail("output sequence differs from the oracle");
  if (kind == PatternKind::Approx) {
    const auto s = got.state_values();
    for (std::size_t i = 1; i < s.size(); ++i)
      if (!(s[i] < s[i - 1])) fail("approximation stream is not strictly decreasing");
    const auto expected_last = want.states.empty() ? std::optional<State>{}
                                                     : std::optional<State>{want.states.back()};
    const auto got_last = s.empty() ? std::optional<State>{} : std::optional<State>{s.back()};
    if (got_last != expected_last) fail("last approximation differs from the oracle");
  }
  // separate: update order is free, the number of emissions is not
  if (kind == PatternKind::Separate && got.states.size() != want.states.size())
    fail("number of state emissions differs");
  if (got.rejected.size() != want.rejected) fail("rejected-task count differs from the oracle");
  return c;
}

// ---------------------------------------------------------------------------
// Runs

inline FarmConfig config_for(PatternKind kind, std::size_t n_w, bool pin) {
  auto c = default_config(kind, n_w);
  c.pin_threads = pin;
  return c;
}

inline workload::TaskStream stream_for(const ExperimentSpec& spec, double t_f, double t_s,
                                       std::size_t m) {
  workload::StreamSpec s;
  s.m = m;
  s.t_a = workload::Micros(spec.t_a);
  s.t_f = workload::Micros(t_f);
  s.t_s = workload::Micros(t_s);
  s.keys = spec.keys;
  s.values = spec.pattern == PatternKind::Approx ? workload::ValueOrder::Shuffled
                                                 : workload::ValueOrder::Ascending;
  s.seed = spec.seed;
  return workload::make_stream(s);
}

using SynthOutcome = PatternOutcome<workload::SynthState, workload::SynthResult>;

inline SynthOutcome run_synthetic(const ExperimentSpec& spec, const workload::TaskStream& stream,
                                  std::size_t n_w, std::size_t freq, double t_s,
                                  const workload::BusyWait& spinner) {
  workload::SyntheticParams params;
  params.pattern = spec.pattern;
  params.partitions = spec.partitions;
  params.flush_frequency = freq;
  params.t_s = workload::Micros(t_s);
  params.oplus = spec.oplus;
  RunOptions options;
  options.inter_arrival = std::chrono::nanoseconds(std::llround(spec.t_a * 1000.0));
  options.events = spec.events;
  return run_pattern<workload::SyntheticTask, workload::SynthState, workload::SynthResult>(
      config_for(spec.pattern, n_w, spec.pin), workload::synthetic_pattern(params, spinner),
      stream.tasks, options);
}

/// Operator laws (accumulator) and an oracle replay of a stream prefix at
/// every degree. Throws VerificationError on the first failure.
inline void verify_before_timing(const ExperimentSpec& spec) {
  if (spec.pattern == PatternKind::Accumulator) {
    const auto laws = check_oplus_laws(spec.oplus, 10000, spec.seed);
    if (!laws.ok())
      throw VerificationError("operator '" + std::string(workload::to_string(spec.oplus)) +
                              "' is not a commutative monoid: " + laws.first_counterexample);
  }
  const auto m = std::min(spec.verify_prefix, spec.tasks);
  if (m == 0) return;
  ExperimentSpec quick = spec;
  quick.t_a = 0;
  quick.events.clear();
  const auto stream = stream_for(quick, 0, 0, m);
  for (auto freq : spec.pattern == PatternKind::Accumulator ? spec.flush_freqs
                                                              : std::vector<std::size_t>{1}) {
    workload::SyntheticParams params;
    params.pattern = spec.pattern;
    params.partitions = spec.partitions;
    params.flush_frequency = freq;
    params.oplus = spec.oplus;
    const auto want = workload::sequential_oracle(workload::synthetic_pattern(params, {}),
                                                  stream.tasks);
    for (auto n_w : spec.degrees) {
      const auto got = run_synthetic(quick, stream, n_w, freq, 0, {});
      const auto cmp = compare_with_oracle(spec.pattern, got, want);
      if (!cmp.ok)
        throw VerificationError(std::string(to_string(spec.pattern)) + " at n_w=" +
                                std::to_string(n_w) + ", freq=" + std::to_string(freq) + ": " +
                                cmp.detail);
    }
  }
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of nothing");
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

/// Called after each cell, e.g. for progress output.
using Progress = std::function<void(const MetricsRecord&)>;

/// One record per (timing x flush frequency x degree) cell, degrees in
/// increasing order. Speedup is against a measured n_w = 1 run of the same
/// cell, which is added (and not reported) if 1 is not among the degrees.
inline std::vector<MetricsRecord> run_experiment(const ExperimentSpec& spec,
                                                 const workload::BusyWait& spinner,
                                                 const Progress& progress = {}) {
  spec.validate();
  verify_before_timing(spec);

  auto degrees = spec.degrees;
  std::sort(degrees.begin(), degrees.end());
  degrees.erase(std::unique(degrees.begin(), degrees.end()), degrees.end());
  const bool baseline_reported = degrees.front() == 1;
  if (!baseline_reported) degrees.insert(degrees.begin(), 1);

  const auto freqs = spec.pattern == PatternKind::Accumulator ? spec.flush_freqs
                                                                : std::vector<std::size_t>{1};
  std::vector<MetricsRecord> records;
  for (auto [t_f, t_s] : spec.timings()) {
    const auto stream = stream_for(spec, t_f, t_s, spec.tasks);
    for (auto freq : freqs) {
      double baseline = 0;
      for (auto n_w : degrees) {
        std::vector<double> times;
        for (int rep = 0; rep < spec.repetitions; ++rep)
          times.push_back(run_synthetic(spec, stream, n_w, freq, t_s, spinner).metrics.completion_us());
        const double measured = median(std::move(times));
        if (n_w == 1) baseline = measured;
        if (n_w == 1 && !baseline_reported) continue;

        const auto model = model_columns(spec.pattern, static_cast<double>(spec.tasks), t_f, t_s,
                                         spec.t_a, n_w);
        MetricsRecord r;
        r.pattern = spec.pattern;
        r.n_w = n_w;
        r.flush_freq = freq;
        r.t_f_us = t_f;
        r.t_s_us = t_s;
        r.measured_us = measured;
        r.ideal_us = model.ideal_us;
        r.speedup = measured > 0 ? baseline / measured : 0;
        r.predicted_speedup = model.predicted_speedup;
        r.bound = model.bound;
        records.push_back(r);
        if (progress) progress(r);
      }
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Oracle-equivalence sweep

struct VerifyCell {
  std::size_t n_w = 1;
  std::size_t flush_freq = 1;
  std::uint64_t seed = 42;
  bool ok = false;
  std::int64_t state = 0;   // final state; sum of entries when partitioned
  std::int64_t oracle = 0;
  std::string detail;
};

inline std::int64_t state_digest(const std::vector<std::int64_t>& s) {
  std::int64_t sum = 0;
  for (auto v : s) sum += v;
  return sum;
}

/// Runs the synthetic workload (values 1..m, spin-free) at every degree and
/// flush frequency and compares each run with the sequential reference.
inline std::vector<VerifyCell> verify_pattern(PatternKind kind, const std::vector<std::size_t>& degrees,
                                              const std::vector<std::size_t>& freqs, std::size_t m,
                                              std::uint64_t seed, std::size_t partitions = 64,
                                              OplusKind oplus = OplusKind::Sum) {
  ExperimentSpec spec;
  spec.pattern = kind;
  spec.tasks = m;
  spec.seed = seed;
  spec.partitions = partitions;
  spec.keys = KeyDistribution::uniform(partitions);
  spec.oplus = oplus;
  spec.degrees = degrees;
  spec.flush_freqs = freqs;
  spec.validate();
  if (kind == PatternKind::Accumulator) {
    const auto laws = check_oplus_laws(oplus, 10000, seed);
    if (!laws.ok())
      throw VerificationError("operator '" + std::string(workload::to_string(oplus)) +
                              "' is not a commutative monoid: " + laws.first_counterexample);
  }
  const auto stream = stream_for(spec, 0, 0, m);
  std::vector<VerifyCell> out;
  for (auto freq : kind == PatternKind::Accumulator ? freqs : std::vector<std::size_t>{1}) {
    workload::SyntheticParams params;
    params.pattern = kind;
    params.partitions = partitions;
    params.flush_frequency = freq;
    params.oplus = oplus;
    const auto want =
        workload::sequential_oracle(workload::synthetic_pattern(params, {}), stream.tasks);
    for (auto n_w : degrees) {
      const auto got = run_synthetic(spec, stream, n_w, freq, 0, {});
      const auto cmp = compare_with_oracle(kind, got, want);
      out.push_back({n_w, freq, seed, cmp.ok, state_digest(got.final_state),
                     state_digest(want.final_state), cmp.detail});
    }
  }
  return out;
}

}  // namespace statefarm::bench
