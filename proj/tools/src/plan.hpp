#pragma once

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

#include "staircase/engine.hpp"
#include "staircase/model.hpp"

namespace staircase::tools {

// ============================================================
// Benchmark plans
// ============================================================

// One schedule knob varied across a set of values. Each value defines a
// sweep cell; everything else about the pipeline stays fixed.
struct SweepSpec {
  std::string parameter;  // first_chunk_size, second_chunk_size, chunk_size,
                          // aggregator_chunk_size, or redundancy
  std::vector<int> values;
};

// Where a plan's outputs land. An empty string disables that sink, except
// for csv: with no path the results table goes to stdout.
struct OutputSpec {
  std::string csv;
  std::string transcripts;  // directory, one <run_id>.json per run
  std::string events;       // directory, one <run_id>.events.jsonl per run
  std::string errors;       // failure report (JSON) path
};

struct BenchmarkPlan {
  PipelineConfig config;
  int repetitions = 1;
  std::vector<RunMode> modes{RunMode::staircase, RunMode::normal};
  std::optional<SweepSpec> sweep;
  double time_scale = 0.0;
  OutputSpec output;
};

// Command-line schedule overrides, applied on top of the plan's schedule
// after any sweep substitution.
struct ScheduleOverrides {
  std::optional<int> first_chunk_size;
  std::optional<int> second_chunk_size;
  std::optional<int> chunk_size;
  std::optional<int> aggregator_chunk_size;
  std::optional<int> redundancy;

  void apply(ChunkSchedule& schedule) const;
  bool any() const;
};

// Applies `parameter = value` to the schedule; false for an unknown name.
bool apply_sweep_value(ChunkSchedule& schedule, const std::string& parameter,
                       int value);

bool parse_mode(const std::string& text, RunMode& mode);

void to_json(nlohmann::json& j, const SweepSpec& s);
void from_json(const nlohmann::json& j, SweepSpec& s);
void to_json(nlohmann::json& j, const OutputSpec& o);
void from_json(const nlohmann::json& j, OutputSpec& o);
void to_json(nlohmann::json& j, const BenchmarkPlan& p);
void from_json(const nlohmann::json& j, BenchmarkPlan& p);

// Throw std::runtime_error with a path-prefixed message on unreadable or
// unparseable input.
BenchmarkPlan load_plan_file(const std::string& path);
PipelineConfig load_config_file(const std::string& path);

// Built-in demonstration plan: four simulated proposers with staggered
// response lengths, one aggregator, no files needed. Runs both modes once
// at time_scale 0.
BenchmarkPlan default_plan();

}  // namespace staircase::tools
