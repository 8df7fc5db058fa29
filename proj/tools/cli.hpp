#pragma once

// statefarm command line: run | model | calibrate | verify.
// Exit codes: 0 ok, 1 usage, 2 runtime failure, 3 verification failure.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "statefarm.hpp"

namespace statefarm::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2, kVerification = 3 };

namespace detail {

inline PatternKind pattern_arg(const std::string& name) {
  auto k = pattern_from_string(name);
  if (!k) throw CLI::ValidationError("--pattern", "unknown pattern '" + name + "'");
  return *k;
}

inline workload::OplusKind oplus_arg(const std::string& name) {
  auto k = workload::oplus_from_string(name);
  if (!k) throw CLI::ValidationError("--oplus", "unknown operator '" + name + "'");
  return *k;
}

inline std::string pattern_names() { return "serial|partitioned|accumulator|approx|separate"; }

}  // namespace detail

inline int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stateful task-farm runner and benchmark harness", "statefarm"};
  app.require_subcommand(1);

  std::string pattern;
  std::vector<std::size_t> workers;
  std::size_t tasks = 0;
  double tf = 0, ts = 0, ta = 0;
  std::vector<std::size_t> freqs;
  std::vector<double> ratios;
  std::uint64_t seed = 42;
  std::string out_path;
  int reps = 0;
  bool pin = false;
  std::size_t partitions = 64;
  std::string oplus = "sum";

  // run
  auto* run = app.add_subcommand("run", "run an experiment spec file and write CSV");
  std::string spec_path;
  run->add_option("spec", spec_path, "experiment spec file (key = value lines)")
      ->required()
      ->check(CLI::ExistingFile);
  auto* run_pattern_opt = run->add_option("--pattern", pattern, detail::pattern_names());
  auto* run_workers = run->add_option("--workers", workers, "parallelism degrees")->delimiter(',');
  auto* run_tasks = run->add_option("--tasks", tasks, "task count");
  auto* run_tf = run->add_option("--tf", tf, "t_f in microseconds");
  auto* run_ts = run->add_option("--ts", ts, "t_s in microseconds");
  auto* run_ta = run->add_option("--ta", ta, "inter-arrival time in microseconds");
  auto* run_freq = run->add_option("--freq", freqs, "flush frequencies")->delimiter(',');
  auto* run_ratios = run->add_option("--ratios", ratios, "t_f/t_s ratios")->delimiter(',');
  auto* run_seed = run->add_option("--seed", seed, "stream seed")->envname("STATEFARM_SEED");
  run->add_option("--out", out_path, "CSV output path (default: stdout)");
  auto* run_reps = run->add_option("--reps", reps, "repetitions per cell")->check(CLI::PositiveNumber);
  auto* run_pin = run->add_flag("--pin", pin, "pin activities to cores (best effort)");
  auto* run_partitions = run->add_option("--partitions", partitions, "partition count");
  auto* run_oplus = run->add_option("--oplus", oplus, "accumulator operator");

  // model
  auto* model = app.add_subcommand("model", "print analytical model values");
  std::string model_pattern = "separate";
  std::vector<std::size_t> model_workers{1};
  double model_tasks = 10000;
  model->add_option("--pattern", model_pattern, detail::pattern_names());
  model->add_option("--workers", model_workers, "parallelism degrees")->delimiter(',');
  model->add_option("--tasks", model_tasks, "task count");
  model->add_option("--tf", tf, "t_f in microseconds")->required();
  model->add_option("--ts", ts, "t_s in microseconds")->required();
  model->add_option("--ta", ta, "inter-arrival time in microseconds");

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "calibrate the busy-wait kernel");

  // verify
  auto* verify = app.add_subcommand("verify", "compare parallel runs with the sequential reference");
  std::vector<std::string> verify_patterns;
  std::vector<std::size_t> verify_workers{1, 2, 4, 8};
  std::vector<std::size_t> verify_freqs{1, 4, 16};
  std::size_t verify_tasks = 10000;
  verify->add_option("--pattern", verify_patterns, "patterns (default: all)")->delimiter(',');
  verify->add_option("--workers", verify_workers, "parallelism degrees")->delimiter(',');
  verify->add_option("--tasks", verify_tasks, "task count");
  verify->add_option("--freq", verify_freqs, "flush frequencies")->delimiter(',');
  verify->add_option("--seed", seed, "stream seed")->envname("STATEFARM_SEED");
  verify->add_option("--partitions", partitions, "partition count");
  verify->add_option("--oplus", oplus, "accumulator operator");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kUsage;
  }

  try {
    if (*model) {
      const auto kind = detail::pattern_arg(model_pattern);
      const double bound =
          kind == PatternKind::Separate ? perfmodel::speedup_bound_separate(tf, ts) : 0;
      if (kind == PatternKind::Separate) out << "bound=" << bench::format_number(bound) << '\n';
      for (auto n : model_workers) {
        const perfmodel::CostParams p{ta, tf, ts, model_tasks, static_cast<double>(n)};
        const auto tc = perfmodel::completion_time(p);
        const auto cols = bench::model_columns(kind, model_tasks, tf, ts, ta, n);
        out << "n_w=" << n << " service_us=" << bench::format_number(perfmodel::service_time(p))
            << " ideal_us=" << bench::format_number(tc.stateful)
            << " stateless_us=" << bench::format_number(tc.stateless)
            << " predicted_speedup=" << bench::format_number(cols.predicted_speedup)
            << " bound=" << bench::format_number(cols.bound) << " min_flush_frequency="
            << bench::format_number(perfmodel::min_flush_frequency(tf, ts, static_cast<double>(n)))
            << '\n';
      }
      return kOk;
    }

    if (*calibrate) {
      const auto table = workload::calibrate();
      out << "iterations_per_us=" << bench::format_number(table.iterations_per_us) << '\n'
          << "timer_resolution_ns=" << bench::format_number(table.timer_resolution_ns) << '\n';
      for (const auto& c : table.checks)
        out << "target_us=" << bench::format_number(c.target_us)
            << " measured_us=" << bench::format_number(c.measured_us) << (c.ok ? " ok" : " FAIL")
            << '\n';
      return kOk;
    }

    if (*verify) {
      std::vector<PatternKind> kinds;
      for (const auto& p : verify_patterns) kinds.push_back(detail::pattern_arg(p));
      if (kinds.empty())
        kinds = {PatternKind::Serial, PatternKind::Partitioned, PatternKind::Accumulator,
                 PatternKind::Approx, PatternKind::Separate};
      const auto op = detail::oplus_arg(oplus);
      bool all_ok = true;
      for (auto kind : kinds) {
        for (const auto& c :
             bench::verify_pattern(kind, verify_workers, verify_freqs, verify_tasks, seed, partitions, op)) {
          out << "pattern=" << to_string(kind) << " n_w=" << c.n_w;
          if (kind == PatternKind::Accumulator) out << " freq=" << c.flush_freq;
          out << " seed=" << c.seed << " state=" << c.state << " oracle=" << c.oracle
              << (c.ok ? " ok" : " MISMATCH " + c.detail) << '\n';
          all_ok = all_ok && c.ok;
        }
      }
      return all_ok ? kOk : kVerification;
    }

    // run
    bench::ExperimentSpec spec;
    try {
      spec = bench::load_spec(spec_path);
      if (*run_pattern_opt) spec.pattern = detail::pattern_arg(pattern);
      if (*run_workers) spec.degrees = workers;
      if (*run_tasks) spec.tasks = tasks;
      if (*run_tf) spec.t_f = tf;
      if (*run_ts) spec.t_s = ts;
      if (*run_ta) spec.t_a = ta;
      if (*run_freq) spec.flush_freqs = freqs;
      if (*run_ratios) spec.ratios = ratios;
      if (*run_seed) spec.seed = seed;
      if (*run_reps) spec.repetitions = reps;
      if (*run_pin) spec.pin = pin;
      if (*run_partitions) {
        spec.partitions = partitions;
        spec.keys.partitions = partitions;
      }
      if (*run_oplus) spec.oplus = detail::oplus_arg(oplus);
      spec.validate();
    } catch (const bench::SpecError& e) {
      err << "statefarm: " << e.what() << '\n' << run->help();
      return kUsage;
    }

    const workload::BusyWait spinner(workload::calibrate());
    const auto records = bench::run_experiment(spec, spinner, [&](const bench::MetricsRecord& r) {
      err << to_string(r.pattern) << " n_w=" << r.n_w << " freq=" << r.flush_freq
          << " t_f=" << r.t_f_us << " t_s=" << r.t_s_us << " measured_us=" << r.measured_us
          << " speedup=" << r.speedup << '\n';
    });
    if (out_path.empty())
      bench::write_csv(records, out);
    else
      bench::emit_csv(records, out_path);
    return kOk;
  } catch (const CLI::ValidationError& e) {
    err << "statefarm: " << e.what() << '\n';
    return kUsage;
  } catch (const bench::VerificationError& e) {
    err << "statefarm: verification failed: " << e.what() << '\n';
    return kVerification;
  } catch (const std::exception& e) {
    err << "statefarm: " << e.what() << '\n';
    return kRuntime;
  }
}

inline int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"statefarm"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace statefarm::cli
