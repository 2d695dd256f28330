#include "commands.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "staircase/engine.hpp"
#include "staircase/metrics.hpp"
#include "staircase/oracle.hpp"

namespace staircase::tools {

namespace {

// ============================================================
// Shared helpers
// ============================================================

std::string fmt(const char* spec, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, value);
  return buf;
}

bool has_live_backend(const PipelineConfig& config) {
  for (const auto& p : config.proposers) {
    if (p.backend.kind == BackendKind::http) return true;
  }
  return config.aggregator.backend.kind == BackendKind::http;
}

// Resolves --plan/--config/--defaults into a plan. Throws std::runtime_error
// on unusable input.
BenchmarkPlan resolve_plan(const std::string& plan_path,
                           const std::string& config_path, bool use_defaults) {
  if (!plan_path.empty()) return load_plan_file(plan_path);
  if (!config_path.empty()) {
    BenchmarkPlan plan;
    plan.config = load_config_file(config_path);
    return plan;
  }
  if (use_defaults) return default_plan();
  throw std::runtime_error("one of --plan, --config, --defaults is required");
}

PipelineConfig resolve_config(const std::string& config_path,
                              bool use_defaults,
                              const ScheduleOverrides& overrides) {
  PipelineConfig config;
  if (!config_path.empty()) {
    config = load_config_file(config_path);
  } else if (use_defaults) {
    config = default_plan().config;
  } else {
    throw std::runtime_error("one of --config, --defaults is required");
  }
  overrides.apply(config.schedule);
  return config;
}

std::vector<RunMode> resolve_modes(const std::vector<std::string>& names,
                                   const std::vector<RunMode>& fallback) {
  if (names.empty()) return fallback;
  std::vector<RunMode> modes;
  for (const auto& name : names) {
    RunMode mode{};
    if (!parse_mode(name, mode)) {
      throw std::runtime_error("unknown mode \"" + name +
                               "\" (expected staircase or normal)");
    }
    modes.push_back(mode);
  }
  return modes;
}

void create_parent_dirs(const std::string& path) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

// ============================================================
// Plan execution
// ============================================================

struct PlannedRun {
  std::string run_id;
  PipelineConfig config;
  RunMode mode;
};

struct RunOutcome {
  bool ok = false;
  std::string error;
  CsvRow row;
  RunTranscript transcript;
};

// Repetition k shifts every jitter seed by k, so rep 0 reproduces the
// plan's seeds exactly and later reps are distinct but deterministic.
void shift_seeds(PipelineConfig& config, int rep) {
  for (auto& p : config.proposers) p.backend.latency.jitter.seed += rep;
  config.aggregator.backend.latency.jitter.seed += rep;
}

std::vector<PlannedRun> expand_plan(const BenchmarkPlan& plan) {
  struct Cell {
    std::string prefix;
    PipelineConfig config;
  };
  std::vector<Cell> cells;
  if (plan.sweep) {
    for (int value : plan.sweep->values) {
      Cell cell;
      cell.config = plan.config;
      if (!apply_sweep_value(cell.config.schedule, plan.sweep->parameter,
                             value)) {
        throw std::runtime_error("unknown sweep parameter \"" +
                                 plan.sweep->parameter + "\"");
      }
      cell.prefix = plan.sweep->parameter + "=" + std::to_string(value) + "-";
      cells.push_back(std::move(cell));
    }
  } else {
    cells.push_back({"", plan.config});
  }

  std::vector<PlannedRun> runs;
  for (const auto& cell : cells) {
    for (RunMode mode : plan.modes) {
      for (int rep = 0; rep < plan.repetitions; ++rep) {
        PlannedRun run;
        run.config = cell.config;
        shift_seeds(run.config, rep);
        run.mode = mode;
        run.run_id =
            cell.prefix + to_string(mode) + "-r" + std::to_string(rep);
        runs.push_back(std::move(run));
      }
    }
  }
  return runs;
}

RunOutcome execute_run(const PlannedRun& planned, double time_scale,
                       double grace_seconds, bool stream, std::ostream& out,
                       std::ostream& err) {
  RunOptions options;
  options.time_scale = time_scale;
  options.barrier_grace_seconds = grace_seconds;
  if (stream) {
    options.on_event = [&](const EngineEvent& e) {
      if (e.kind == EventKind::aggregator_delta) {
        out << e.text;
        out.flush();
      } else if (e.kind == EventKind::agent_error) {
        err << "  [" << e.agent << " " << e.error_kind << "] "
            << e.error_message << "\n";
      }
    };
  }

  RunResult result = run_pipeline(planned.config, planned.mode, options);

  RunOutcome outcome;
  outcome.ok = result.ok;
  outcome.error = result.error;
  outcome.transcript = std::move(result.transcript);
  if (result.ok && outcome.transcript.metrics) {
    const RunMetrics& m = *outcome.transcript.metrics;
    outcome.row.run_id = planned.run_id;
    outcome.row.mode = to_string(planned.mode);
    outcome.row.topology = to_string(planned.config.topology);
    outcome.row.first_chunk_size = planned.config.schedule.first_chunk_size;
    outcome.row.redundancy = planned.config.schedule.redundancy;
    outcome.row.ttft_s = m.ttft_seconds;
    outcome.row.tps = m.tps;
    outcome.row.agg_tokens = m.aggregator_token_count;
    outcome.row.wall_s = m.total_wall_seconds;
    outcome.row.prompt_tokens = m.prompt_tokens_consumed;
  }
  return outcome;
}

void report_outcome(const PlannedRun& planned, const RunOutcome& outcome,
                    std::ostream& err) {
  if (outcome.ok) {
    err << planned.run_id << ": ttft=" << fmt("%.3f", outcome.row.ttft_s)
        << "s tps=" << fmt("%.1f", outcome.row.tps)
        << " agg_tokens=" << outcome.row.agg_tokens
        << " wall=" << fmt("%.3f", outcome.row.wall_s)
        << "s prompt_tokens=" << outcome.row.prompt_tokens << "\n";
  } else {
    err << planned.run_id << ": FAILED (" << outcome.error << ")\n";
  }
}

void write_transcript_file(const std::string& dir, const PlannedRun& planned,
                           const RunTranscript& transcript) {
  std::filesystem::create_directories(dir);
  auto path = std::filesystem::path(dir) / (planned.run_id + ".json");
  std::ofstream file(path);
  if (!file) throw std::runtime_error(path.string() + ": cannot write");
  nlohmann::json j = transcript;
  file << j.dump(2) << "\n";
}

void write_events_file(const std::string& dir, const PlannedRun& planned,
                       const RunTranscript& transcript) {
  std::filesystem::create_directories(dir);
  auto path =
      std::filesystem::path(dir) / (planned.run_id + ".events.jsonl");
  std::ofstream file(path);
  if (!file) throw std::runtime_error(path.string() + ": cannot write");
  nlohmann::json header{{"kind", "run_header"},
                        {"run_id", planned.run_id},
                        {"mode", to_string(planned.mode)},
                        {"topology", to_string(planned.config.topology)}};
  file << header.dump() << "\n";
  write_events_jsonl(file, transcript.events);
}

}  // namespace

// ============================================================
// run
// ============================================================

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err) {
  BenchmarkPlan plan;
  try {
    plan = resolve_plan(args.plan_path, args.config_path, args.use_defaults);
    args.overrides.apply(plan.config.schedule);
    if (!args.sweep_parameter.empty()) {
      plan.sweep = SweepSpec{args.sweep_parameter, args.sweep_values};
    }
    plan.modes = resolve_modes(args.modes, plan.modes);
    if (args.repetitions) plan.repetitions = *args.repetitions;
    if (args.time_scale) plan.time_scale = *args.time_scale;
    if (args.csv) plan.output.csv = *args.csv;
    if (args.transcripts) plan.output.transcripts = *args.transcripts;
    if (args.events) plan.output.events = *args.events;
    if (args.errors) plan.output.errors = *args.errors;
    if (plan.repetitions < 1) {
      throw std::runtime_error("--repetitions must be at least 1");
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  // Live services only ever see wall time, so paced replay is the only
  // meaningful setting when any backend is http.
  double time_scale = plan.time_scale;
  if (has_live_backend(plan.config) && time_scale != 1.0) {
    err << "note: live http backend present, forcing time_scale 1.0\n";
    time_scale = 1.0;
  }

  std::vector<PlannedRun> runs;
  try {
    runs = expand_plan(plan);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  int parallel = args.parallel_cells;
  if (parallel > 1 && has_live_backend(plan.config)) {
    err << "error: --parallel-cells needs simulated backends only\n";
    return 2;
  }
  if (parallel > 1 && args.stream) {
    err << "note: --stream forces serial execution\n";
    parallel = 1;
  }
  if (parallel > static_cast<int>(runs.size())) {
    parallel = static_cast<int>(runs.size());
  }

  std::vector<RunOutcome> outcomes(runs.size());
  if (parallel > 1) {
    std::atomic<std::size_t> next{0};
    std::mutex io_mutex;
    auto worker = [&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= runs.size()) return;
        outcomes[i] = execute_run(runs[i], time_scale,
                                  args.barrier_grace_seconds,
                                  /*stream=*/false, out, err);
        std::lock_guard<std::mutex> lock(io_mutex);
        report_outcome(runs[i], outcomes[i], err);
      }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < parallel; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  } else {
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (args.stream) err << "== " << runs[i].run_id << " ==\n";
      outcomes[i] = execute_run(runs[i], time_scale,
                                args.barrier_grace_seconds, args.stream, out,
                                err);
      if (args.stream && outcomes[i].ok) out << "\n";
      report_outcome(runs[i], outcomes[i], err);
    }
  }

  // Results table, in planned order. Failed runs contribute no row; they
  // land in the error report instead.
  try {
    std::ofstream csv_file;
    std::ostream* csv = nullptr;
    if (!plan.output.csv.empty()) {
      create_parent_dirs(plan.output.csv);
      csv_file.open(plan.output.csv);
      if (!csv_file) {
        throw std::runtime_error(plan.output.csv + ": cannot write");
      }
      csv = &csv_file;
    } else if (!args.stream) {
      csv = &out;
    }
    if (csv != nullptr) {
      write_csv_header(*csv);
      for (std::size_t i = 0; i < runs.size(); ++i) {
        if (outcomes[i].ok) write_csv_row(*csv, outcomes[i].row);
      }
    }

    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (!plan.output.transcripts.empty()) {
        write_transcript_file(plan.output.transcripts, runs[i],
                              outcomes[i].transcript);
      }
      if (!plan.output.events.empty()) {
        write_events_file(plan.output.events, runs[i],
                          outcomes[i].transcript);
      }
    }

    nlohmann::json failures = nlohmann::json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (!outcomes[i].ok) {
        failures.push_back({{"run_id", runs[i].run_id},
                            {"error", outcomes[i].error}});
      }
    }
    if (!plan.output.errors.empty()) {
      create_parent_dirs(plan.output.errors);
      std::ofstream errors_file(plan.output.errors);
      if (!errors_file) {
        throw std::runtime_error(plan.output.errors + ": cannot write");
      }
      errors_file << failures.dump(2) << "\n";
    }
    if (!failures.empty()) {
      err << failures.size() << " of " << runs.size() << " runs failed\n";
      return 1;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

// ============================================================
// validate
// ============================================================

int cmd_validate(const ValidateArgs& args, std::ostream& out,
                 std::ostream& err) {
  PipelineConfig config;
  std::vector<RunMode> modes;
  try {
    config =
        resolve_config(args.config_path, args.use_defaults, args.overrides);
    modes = resolve_modes(args.modes, {RunMode::staircase, RunMode::normal});
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  if (has_live_backend(config)) {
    err << "error: validate needs simulated backends; a live service has "
           "no reference timeline to check against\n";
    return 2;
  }

  bool all_pass = true;
  for (RunMode mode : modes) {
    OracleRun reference;
    try {
      reference = oracle_simulate(config, mode);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return 2;
    }

    RunOptions options;
    options.time_scale = args.time_scale;
    options.barrier_grace_seconds = args.barrier_grace_seconds;
    RunResult result = run_pipeline(config, mode, options);
    if (!result.ok) {
      out << "[FAIL] mode=" << to_string(mode) << " run failed: "
          << result.error << "\n";
      all_pass = false;
      continue;
    }

    CompareReport report = compare_run(reference, result.transcript);
    bool pass = report.within(args.tolerance);
    out << (pass ? "[PASS]" : "[FAIL]") << " mode=" << to_string(mode)
        << " max_deviation=" << fmt("%.6g", report.max_relative_deviation);
    if (!report.worst_timing.empty()) {
      out << " (" << report.worst_timing << ")";
    }
    out << " mismatches=" << report.mismatches.size() << "\n";
    std::size_t shown = 0;
    for (const auto& mismatch : report.mismatches) {
      if (++shown > 5) {
        out << "  ... " << report.mismatches.size() - 5 << " more\n";
        break;
      }
      out << "  - " << mismatch << "\n";
    }
    all_pass = all_pass && pass;
  }
  return all_pass ? 0 : 1;
}

// ============================================================
// render
// ============================================================

namespace {

void print_prompt(std::ostream& out, int round,
                  const std::vector<Message>& messages) {
  out << "== round " << round << " ==\n";
  for (const auto& m : messages) {
    out << "[" << to_string(m.role) << "]\n" << m.content << "\n";
  }
}

}  // namespace

int cmd_render(const RenderArgs& args, std::ostream& out, std::ostream& err) {
  std::vector<RoundPrompt> prompts;
  try {
    if (!args.transcript_path.empty()) {
      std::ifstream in(args.transcript_path);
      if (!in) {
        throw std::runtime_error(args.transcript_path + ": cannot open");
      }
      RunTranscript transcript = nlohmann::json::parse(in);
      prompts = std::move(transcript.aggregator_prompts);
    } else {
      PipelineConfig config =
          resolve_config(args.config_path, args.use_defaults, args.overrides);
      RunMode mode{};
      if (!parse_mode(args.mode, mode)) {
        throw std::runtime_error("unknown mode \"" + args.mode + "\"");
      }
      OracleRun reference = oracle_simulate(config, mode);
      for (const auto& round : reference.rounds) {
        if (round.prompt.empty()) continue;
        prompts.push_back({round.round, round.prompt});
      }
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  bool printed = false;
  for (const auto& prompt : prompts) {
    if (args.round > 0 && prompt.round != args.round) continue;
    if (printed) out << "\n";
    print_prompt(out, prompt.round, prompt.messages);
    printed = true;
  }
  if (!printed) {
    err << "error: no prompt for round " << args.round << "\n";
    return 2;
  }
  return 0;
}

}  // namespace staircase::tools
