#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"

namespace {

using staircase::tools::RenderArgs;
using staircase::tools::RunArgs;
using staircase::tools::ScheduleOverrides;
using staircase::tools::ValidateArgs;

void add_schedule_flags(CLI::App* cmd, ScheduleOverrides& overrides) {
  cmd->add_option("--first-chunk-size", overrides.first_chunk_size,
                  "Round-1 generation size for every agent");
  cmd->add_option("--second-chunk-size", overrides.second_chunk_size,
                  "Round-2 generation size for every agent");
  cmd->add_option("--chunk-size", overrides.chunk_size,
                  "Steady-state proposer generation size");
  cmd->add_option("--aggregator-chunk-size", overrides.aggregator_chunk_size,
                  "Steady-state aggregator generation size");
  cmd->add_option("--redundancy", overrides.redundancy,
                  "How many slowest proposers each barrier may leave behind");
}

void add_run_flags(CLI::App* cmd, RunArgs& args) {
  cmd->add_option("--plan", args.plan_path, "Benchmark plan JSON");
  cmd->add_option("--config", args.config_path,
                  "Pipeline config JSON (single cell)");
  cmd->add_flag("--defaults", args.use_defaults,
                "Use the built-in demonstration plan");
  cmd->add_option("--mode", args.modes, "staircase and/or normal")
      ->delimiter(',');
  cmd->add_option("--repetitions", args.repetitions,
                  "Runs per cell and mode");
  cmd->add_option("--time-scale", args.time_scale,
                  "Wall pacing for simulated backends: 1 = real time, "
                  "0 = as fast as possible");
  cmd->add_option("--csv", args.csv, "Results table path (default: stdout)");
  cmd->add_option("--transcripts", args.transcripts,
                  "Directory for per-run transcript JSON");
  cmd->add_option("--events", args.events,
                  "Directory for per-run event JSONL");
  cmd->add_option("--errors", args.errors, "Failure report path");
  cmd->add_option("--barrier-grace", args.barrier_grace_seconds,
                  "Paced barrier grace window, seconds");
  cmd->add_flag("--stream", args.stream,
                "Stream aggregator deltas to stdout (diagnostics on stderr)");
  cmd->add_option("--parallel-cells", args.parallel_cells,
                  "Concurrent runs (simulated plans only)");
  add_schedule_flags(cmd, args.overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chunked hand-off runner for multi-agent generation"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand(
      "run", "Execute a benchmark plan and emit a results table");
  add_run_flags(run, run_args);

  RunArgs sweep_args;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Run a plan once per value of one schedule parameter");
  sweep
      ->add_option("--parameter", sweep_args.sweep_parameter,
                   "first_chunk_size, second_chunk_size, chunk_size, "
                   "aggregator_chunk_size, or redundancy")
      ->required();
  sweep->add_option("--values", sweep_args.sweep_values, "Values to sweep")
      ->required()
      ->delimiter(',');
  add_run_flags(sweep, sweep_args);

  ValidateArgs validate_args;
  CLI::App* validate = app.add_subcommand(
      "validate", "Check an engine run against the reference simulation");
  validate->add_option("--config", validate_args.config_path,
                       "Pipeline config JSON");
  validate->add_flag("--defaults", validate_args.use_defaults,
                     "Use the built-in demonstration config");
  validate->add_option("--mode", validate_args.modes,
                       "staircase and/or normal (default: both)")
      ->delimiter(',');
  validate->add_option("--tolerance", validate_args.tolerance,
                       "Largest accepted relative timing deviation");
  validate->add_option("--time-scale", validate_args.time_scale,
                       "Wall pacing for the checked run (default 0)");
  validate->add_option("--barrier-grace",
                       validate_args.barrier_grace_seconds,
                       "Paced barrier grace window, seconds");
  add_schedule_flags(validate, validate_args.overrides);

  RenderArgs render_args;
  CLI::App* render = app.add_subcommand(
      "render", "Print the aggregator prompts a config or transcript yields");
  render->add_option("--config", render_args.config_path,
                     "Pipeline config JSON (prompts come from the reference "
                     "simulation)");
  render->add_option("--transcript", render_args.transcript_path,
                     "Saved transcript JSON (prompts come from the run)");
  render->add_flag("--defaults", render_args.use_defaults,
                   "Use the built-in demonstration config");
  render->add_option("--mode", render_args.mode, "staircase or normal");
  render->add_option("--round", render_args.round,
                     "Only this round (default: all)");
  add_schedule_flags(render, render_args.overrides);

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    return staircase::tools::cmd_run(run_args, std::cout, std::cerr);
  }
  if (sweep->parsed()) {
    return staircase::tools::cmd_run(sweep_args, std::cout, std::cerr);
  }
  if (validate->parsed()) {
    return staircase::tools::cmd_validate(validate_args, std::cout,
                                          std::cerr);
  }
  if (render->parsed()) {
    return staircase::tools::cmd_render(render_args, std::cout, std::cerr);
  }
  return 0;
}
