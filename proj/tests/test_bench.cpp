#include <gtest/gtest.h>

#include <statefarm/bench.hpp>

#include <cli.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace statefarm;
using namespace statefarm::bench;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("statefarm_test_" + name);
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

MetricsRecord record(std::size_t n_w, double measured) {
  MetricsRecord r;
  r.pattern = PatternKind::Separate;
  r.n_w = n_w;
  r.flush_freq = 1;
  r.t_f_us = 100;
  r.t_s_us = 20;
  r.measured_us = measured;
  r.ideal_us = 1234.5;
  r.speedup = 0.1 + 1.0 / 3.0;
  r.predicted_speedup = 2.75;
  r.bound = 6;
  return r;
}

}  // namespace

TEST(SpecFile, ParseAllKeys) {
  const auto spec = parse_spec(R"(# comment
pattern = separate
tasks = 2000
tf = 50
ts = 10   # trailing comment
ta = 0.5
ratios = 5, 10
degrees = 1,2,4
flush_freqs = 1,4
repetitions = 5
seed = 7
events = 500:+2,1500:-1
partitions = 32
keys = zipf
theta = 1.25
oplus = max
pin = true
verify_prefix = 100
)");
  EXPECT_EQ(spec.pattern, PatternKind::Separate);
  EXPECT_EQ(spec.tasks, 2000u);
  EXPECT_EQ(spec.t_a, 0.5);
  EXPECT_EQ(spec.ratios, (std::vector<double>{5, 10}));
  EXPECT_EQ(spec.degrees, (std::vector<std::size_t>{1, 2, 4}));
  EXPECT_EQ(spec.repetitions, 5);
  EXPECT_EQ(spec.events, (std::vector<AdaptivityEvent>{{500, 2}, {1500, -1}}));
  EXPECT_EQ(spec.keys.kind, KeyDistribution::Kind::Zipf);
  EXPECT_EQ(spec.keys.partitions, 32u);
  EXPECT_EQ(spec.keys.theta, 1.25);
  EXPECT_EQ(spec.oplus, workload::OplusKind::Max);
  EXPECT_TRUE(spec.pin);
  EXPECT_EQ(spec.timings(), (std::vector<std::pair<double, double>>{{50, 10}, {100, 10}}));
}

TEST(SpecFile, Errors) {
  EXPECT_THROW(parse_spec("pattern = nope"), SpecError);
  EXPECT_THROW(parse_spec("colour = red"), SpecError);
  EXPECT_THROW(parse_spec("degrees ="), SpecError);
  EXPECT_THROW(parse_spec("repetitions = 0"), SpecError);
  EXPECT_THROW(parse_spec("tasks = -3"), SpecError);
  EXPECT_THROW(parse_spec("just words"), SpecError);
  EXPECT_THROW(parse_spec("events = 10:0"), SpecError);
  EXPECT_THROW(parse_spec("pattern = partitioned\npartitions = 2\ndegrees = 4"), SpecError);
  try {
    parse_spec("\n\ntf = abc");
    FAIL();
  } catch (const SpecError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

// parse -> serialize -> parse over randomised specs
TEST(SpecFile, RoundTripProperty) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> real(0, 500);
  for (int trial = 0; trial < 500; ++trial) {
    ExperimentSpec s;
    s.pattern = static_cast<PatternKind>(rng() % 5);
    s.tasks = rng() % 100000;
    s.t_f = real(rng);
    s.t_s = real(rng);
    s.t_a = trial % 3 ? 0 : real(rng);
    if (rng() % 2) s.ratios = {real(rng), real(rng)};
    s.partitions = 8 + rng() % 100;
    s.degrees = {1 + rng() % 8, 1 + rng() % 8};
    s.flush_freqs = {1 + rng() % 16};
    s.repetitions = 1 + static_cast<int>(rng() % 9);
    s.seed = rng();
    if (rng() % 2) s.events = {{rng() % 1000, 2}, {1000 + rng() % 1000, -1}};
    s.keys = KeyDistribution::zipf(s.partitions, real(rng) / 100);
    s.oplus = static_cast<workload::OplusKind>(rng() % 4);
    s.pin = rng() % 2;
    const auto text = serialize_spec(s);
    const auto back = parse_spec(text);
    ASSERT_EQ(back, s) << text;
    ASSERT_EQ(serialize_spec(back), text);
  }
}

TEST(Csv, HeaderAndSingleRecord) {
  const auto path = temp_path("one.csv");
  emit_csv({record(1, 10)}, path.string());
  const auto text = read_file(path);
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "pattern,n_w,flush_freq,t_f_us,t_s_us,measured_us,ideal_us,speedup,predicted_speedup,bound");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  std::filesystem::remove(path);
}

TEST(Csv, FiveDegreesRoundTrip) {
  std::vector<MetricsRecord> records;
  for (std::size_t n : {1u, 2u, 4u, 8u, 16u}) records.push_back(record(n, 1e6 / double(n) + 0.125));
  records.back().bound = perfmodel::kUnbounded;
  const auto path = temp_path("five.csv");
  emit_csv(records, path.string());
  const auto text = read_file(path);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 6);
  EXPECT_EQ(text.find("e+"), std::string::npos);
  const auto back = parse_csv(text);
  EXPECT_EQ(back, records);
  for (std::size_t i = 1; i < back.size(); ++i) EXPECT_GT(back[i].n_w, back[i - 1].n_w);
  std::filesystem::remove(path);
}

TEST(Csv, PlainDecimalFields) {
  EXPECT_EQ(format_number(1e-7), "0.0000001");
  EXPECT_EQ(format_number(2.5e9), "2500000000");
  EXPECT_EQ(format_number(0.1), "0.1");
  std::ostringstream out;
  write_csv({record(3, 1e-5)}, out);
  EXPECT_EQ(out.str().find("e-"), std::string::npos);
}

TEST(Csv, Errors) {
  EXPECT_THROW(emit_csv({}, temp_path("empty.csv").string()), std::invalid_argument);
  EXPECT_THROW(emit_csv({record(1, 1)}, "/nonexistent-dir/x.csv"), std::runtime_error);
  EXPECT_THROW(parse_csv("a,b\n"), SpecError);
}

TEST(ModelColumns, MatchPerfmodel) {
  const auto sep = model_columns(PatternKind::Separate, 1000, 100, 20, 0, 4);
  EXPECT_EQ(sep.ideal_us, perfmodel::completion_time({0, 100, 20, 1000, 4}).stateful);
  EXPECT_EQ(sep.predicted_speedup, perfmodel::predicted_speedup_separate(100, 20, 4));
  EXPECT_EQ(sep.bound, 6);
  const auto acc = model_columns(PatternKind::Accumulator, 1000, 100, 20, 0, 4);
  EXPECT_EQ(acc.predicted_speedup, 4);
  const auto ser = model_columns(PatternKind::Serial, 1000, 100, 20, 0, 4);
  EXPECT_EQ(ser.bound, 1);
}

TEST(Laws, BenchmarkOperatorsPassDifferenceFails) {
  for (auto k : {workload::OplusKind::Sum, workload::OplusKind::Max, workload::OplusKind::Min,
                 workload::OplusKind::Xor}) {
    const auto r = check_oplus_laws(k);
    EXPECT_TRUE(r.ok()) << workload::to_string(k) << ": " << r.first_counterexample;
    EXPECT_EQ(r.triples, 10000u);
  }
  const auto bad = check_oplus_laws(workload::OplusKind::Difference);
  EXPECT_FALSE(bad.ok());
  EXPECT_GT(bad.associativity_violations, 0u);
  EXPECT_GT(bad.commutativity_violations, 0u);
  EXPECT_FALSE(bad.first_counterexample.empty());
}

TEST(RunExperiment, SingleDegreeGivesSpeedupOne) {
  ExperimentSpec s;
  s.pattern = PatternKind::Accumulator;
  s.tasks = 200;
  s.t_f = 5;
  s.t_s = 1;
  s.degrees = {1};
  s.repetitions = 3;
  const auto records = run_experiment(s, workload::BusyWait(workload::calibrate()));
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].speedup, 1.0);
  EXPECT_EQ(records[0].ideal_us, 200.0 * 6);
  EXPECT_GT(records[0].measured_us, 0);
}

TEST(RunExperiment, CellsAndBaseline) {
  ExperimentSpec s;
  s.pattern = PatternKind::Accumulator;
  s.tasks = 300;
  s.t_f = 0;
  s.t_s = 0;
  s.ratios = {};
  s.degrees = {4, 2};
  s.flush_freqs = {1, 8};
  s.repetitions = 1;
  const auto records = run_experiment(s, {});
  ASSERT_EQ(records.size(), 4u);  // the n_w = 1 baseline is run but not reported
  EXPECT_EQ(records[0].n_w, 2u);
  EXPECT_EQ(records[1].n_w, 4u);
  EXPECT_EQ(records[2].flush_freq, 8u);
}

TEST(RunExperiment, BrokenOperatorIsAVerificationFailure) {
  ExperimentSpec s;
  s.tasks = 100;
  s.oplus = workload::OplusKind::Difference;
  EXPECT_THROW(run_experiment(s, {}), VerificationError);
}

TEST(Verify, AccumulatorSumIsIdenticalAcrossDegrees) {
  const auto cells = verify_pattern(PatternKind::Accumulator, {1, 4}, {1, 16}, 10000, 42);
  ASSERT_EQ(cells.size(), 4u);
  for (const auto& c : cells) {
    EXPECT_TRUE(c.ok) << c.detail;
    EXPECT_EQ(c.state, 50005000);
  }
}

TEST(Cli, ModelPrintsBound) {
  const auto r = run_cli({"model", "--tf", "100", "--ts", "1"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("bound=101\n"), std::string::npos) << r.out;
}

TEST(Cli, ModelDegreesAndFlush) {
  const auto r = run_cli({"model", "--tf", "2", "--ts", "1", "--workers", "1,8", "--tasks", "100"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("n_w=8 "), std::string::npos);
  EXPECT_NE(r.out.find("min_flush_frequency=16"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("ideal_us=300 "), std::string::npos) << r.out;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, 1);
  const auto missing = run_cli({"run", "/definitely/not/here.spec"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run_cli({"run"}).code, 1);
  EXPECT_EQ(run_cli({"model", "--tf", "1"}).code, 1);
  EXPECT_EQ(run_cli({"bogus"}).code, 1);
  EXPECT_EQ(run_cli({"verify", "--pattern", "nope"}).code, 1);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, VerifyAccumulator) {
  const auto r = run_cli({"verify", "--pattern", "accumulator", "--workers", "1,4", "--tasks", "10000"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("state=50005000"), std::string::npos);
  EXPECT_EQ(r.out.find("MISMATCH"), std::string::npos);
}

TEST(Cli, VerifyAllPatternsSmall) {
  const auto r = run_cli({"verify", "--workers", "1,3", "--tasks", "2000", "--freq", "1,5"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  for (auto name : {"serial", "partitioned", "accumulator", "approx", "separate"})
    EXPECT_NE(r.out.find(std::string("pattern=") + name), std::string::npos);
}

TEST(Cli, VerifyBadOperatorExitsThree) {
  const auto r = run_cli({"verify", "--pattern", "accumulator", "--oplus", "difference", "--tasks", "100"});
  EXPECT_EQ(r.code, 3);
}

TEST(Cli, RunWritesCsvAndBadOperatorExitsThree) {
  const auto spec = temp_path("run.spec");
  const auto csv = temp_path("run.csv");
  {
    std::ofstream f(spec);
    f << "pattern = separate\ntasks = 200\ntf = 5\nts = 1\ndegrees = 1,2\nrepetitions = 1\n";
  }
  auto r = run_cli({"run", spec.string(), "--out", csv.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto records = parse_csv(read_file(csv));
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[1].bound, 6);

  r = run_cli({"run", spec.string(), "--pattern", "accumulator", "--oplus", "difference"});
  EXPECT_EQ(r.code, 3) << r.err;

  {
    std::ofstream f(spec);
    f << "pattern = separate\nnot a line\n";
  }
  EXPECT_EQ(run_cli({"run", spec.string()}).code, 1);
  std::filesystem::remove(spec);
  std::filesystem::remove(csv);
}

TEST(Cli, CalibratePrintsTable) {
  const auto r = run_cli({"calibrate"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("iterations_per_us="), std::string::npos);
  EXPECT_NE(r.out.find("target_us=100 "), std::string::npos);
}
