#include "plan.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace staircase::tools {

// ============================================================
// Overrides and sweeps
// ============================================================

void ScheduleOverrides::apply(ChunkSchedule& schedule) const {
  if (first_chunk_size) schedule.first_chunk_size = *first_chunk_size;
  if (second_chunk_size) schedule.second_chunk_size = *second_chunk_size;
  if (chunk_size) schedule.chunk_size = *chunk_size;
  if (aggregator_chunk_size) {
    schedule.aggregator_chunk_size = *aggregator_chunk_size;
  }
  if (redundancy) schedule.redundancy = *redundancy;
}

bool ScheduleOverrides::any() const {
  return first_chunk_size || second_chunk_size || chunk_size ||
         aggregator_chunk_size || redundancy;
}

bool apply_sweep_value(ChunkSchedule& schedule, const std::string& parameter,
                       int value) {
  if (parameter == "first_chunk_size") {
    schedule.first_chunk_size = value;
  } else if (parameter == "second_chunk_size") {
    schedule.second_chunk_size = value;
  } else if (parameter == "chunk_size") {
    schedule.chunk_size = value;
  } else if (parameter == "aggregator_chunk_size") {
    schedule.aggregator_chunk_size = value;
  } else if (parameter == "redundancy") {
    schedule.redundancy = value;
  } else {
    return false;
  }
  return true;
}

bool parse_mode(const std::string& text, RunMode& mode) {
  if (text == "staircase") {
    mode = RunMode::staircase;
  } else if (text == "normal") {
    mode = RunMode::normal;
  } else {
    return false;
  }
  return true;
}

// ============================================================
// JSON
// ============================================================

void to_json(nlohmann::json& j, const SweepSpec& s) {
  j = nlohmann::json{{"parameter", s.parameter}, {"values", s.values}};
}

void from_json(const nlohmann::json& j, SweepSpec& s) {
  s.parameter = j.value("parameter", std::string{});
  s.values = j.value("values", std::vector<int>{});
}

void to_json(nlohmann::json& j, const OutputSpec& o) {
  j = nlohmann::json{{"csv", o.csv},
                     {"transcripts", o.transcripts},
                     {"events", o.events},
                     {"errors", o.errors}};
}

void from_json(const nlohmann::json& j, OutputSpec& o) {
  o.csv = j.value("csv", std::string{});
  o.transcripts = j.value("transcripts", std::string{});
  o.events = j.value("events", std::string{});
  o.errors = j.value("errors", std::string{});
}

void to_json(nlohmann::json& j, const BenchmarkPlan& p) {
  j = nlohmann::json{{"config", p.config},
                     {"repetitions", p.repetitions},
                     {"time_scale", p.time_scale},
                     {"output", p.output}};
  auto modes = nlohmann::json::array();
  for (RunMode m : p.modes) modes.push_back(to_string(m));
  j["modes"] = std::move(modes);
  if (p.sweep) j["sweep"] = *p.sweep;
}

void from_json(const nlohmann::json& j, BenchmarkPlan& p) {
  p.config = j.at("config").get<PipelineConfig>();
  p.repetitions = j.value("repetitions", 1);
  p.time_scale = j.value("time_scale", 0.0);
  if (j.contains("output")) p.output = j.at("output").get<OutputSpec>();
  if (j.contains("modes")) {
    p.modes.clear();
    for (const auto& entry : j.at("modes")) {
      RunMode mode{};
      if (!parse_mode(entry.get<std::string>(), mode)) {
        throw std::runtime_error("unknown mode \"" +
                                 entry.get<std::string>() + "\"");
      }
      p.modes.push_back(mode);
    }
  }
  if (j.contains("sweep") && !j.at("sweep").is_null()) {
    p.sweep = j.at("sweep").get<SweepSpec>();
  }
}

namespace {

nlohmann::json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace

BenchmarkPlan load_plan_file(const std::string& path) {
  try {
    return parse_file(path).get<BenchmarkPlan>();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("plan ") + e.what());
  }
}

PipelineConfig load_config_file(const std::string& path) {
  try {
    return parse_file(path).get<PipelineConfig>();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("config ") + e.what());
  }
}

// ============================================================
// Built-in plan
// ============================================================

namespace {

// Deterministic pseudo-prose so the demo needs no script files. Not meant
// to read well, only to stream and tokenize like text.
std::string synthetic_script(unsigned salt, int words) {
  static const char* const kBank[16] = {
      "the",   "signal", "clock", "orbit", "drift", "frame",
      "phase", "offset", "rate",  "bias",  "pulse", "range",
      "model", "error",  "delay", "path",
  };
  std::string out;
  for (int k = 0; k < words; ++k) {
    unsigned v = salt * 2654435761u + static_cast<unsigned>(k) * 40503u;
    v ^= v >> 7;
    if (k > 0) out += ' ';
    out += kBank[v % 16];
  }
  return out;
}

AgentSpec synthetic_agent(const std::string& name, unsigned salt, int words,
                          unsigned long long seed) {
  AgentSpec agent;
  agent.name = name;
  agent.backend.kind = BackendKind::simulated;
  agent.backend.script_text = synthetic_script(salt, words);
  agent.backend.latency.fixed_overhead_seconds = 0.05;
  agent.backend.latency.prefill_seconds_per_prompt_token = 0.0005;
  agent.backend.latency.decode_seconds_per_token = 0.02;
  agent.backend.latency.jitter.seed = seed;
  agent.backend.latency.jitter.max_fraction = 0.15;
  return agent;
}

}  // namespace

BenchmarkPlan default_plan() {
  BenchmarkPlan plan;
  plan.config.query =
      "Explain why satellite navigation clocks need relativistic "
      "corrections.";
  plan.config.proposers = {
      synthetic_agent("p1", 11, 180, 1),
      synthetic_agent("p2", 23, 240, 2),
      synthetic_agent("p3", 37, 300, 3),
      synthetic_agent("p4", 53, 360, 4),
  };
  plan.config.aggregator = synthetic_agent("aggregator", 71, 320, 99);
  plan.config.topology = Topology::moa;
  return plan;
}

}  // namespace staircase::tools
