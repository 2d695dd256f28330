#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "plan.hpp"

namespace staircase::tools {

// ============================================================
// Subcommand entry points
// ============================================================
// Each takes explicit streams so tests can drive them in-process. Exit
// codes: 0 success, 1 a run or check failed, 2 unusable input.

struct RunArgs {
  std::string plan_path;
  std::string config_path;
  bool use_defaults = false;
  ScheduleOverrides overrides;
  std::vector<std::string> modes;  // empty keeps the plan's modes
  std::optional<int> repetitions;
  std::optional<double> time_scale;
  std::optional<std::string> csv;
  std::optional<std::string> transcripts;
  std::optional<std::string> events;
  std::optional<std::string> errors;
  double barrier_grace_seconds = 0.002;
  // Forward aggregator deltas to stdout as they stream; diagnostics go to
  // stderr. Disables the stdout CSV fallback and forces serial execution.
  bool stream = false;
  // Run this many sweep cells concurrently. Simulated-only plans; refused
  // when any backend is live.
  int parallel_cells = 1;
  // Flag-level sweep (the sweep subcommand); overrides the plan's sweep.
  std::string sweep_parameter;
  std::vector<int> sweep_values;
};

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err);

struct ValidateArgs {
  std::string config_path;
  bool use_defaults = false;
  ScheduleOverrides overrides;
  std::vector<std::string> modes;  // empty checks both
  double tolerance = 0.02;
  // Checked at 0 (fast replay) by default; raise it to exercise the paced
  // path against the same reference.
  double time_scale = 0.0;
  double barrier_grace_seconds = 0.002;
};

int cmd_validate(const ValidateArgs& args, std::ostream& out,
                 std::ostream& err);

struct RenderArgs {
  std::string config_path;
  std::string transcript_path;
  bool use_defaults = false;
  ScheduleOverrides overrides;
  std::string mode = "staircase";
  int round = 0;  // 0 prints every round
};

int cmd_render(const RenderArgs& args, std::ostream& out, std::ostream& err);

}  // namespace staircase::tools
