#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "staircase/model.hpp"

// Shared builders for the test suites. STAIRCASE_TEST_DIR points at the
// tests/ source directory so fixtures resolve regardless of the build tree.

namespace test_support {

inline std::string fixture_path(const std::string& relative) {
  return std::string(STAIRCASE_TEST_DIR) + "/fixtures/" + relative;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Fixture files carry one trailing newline so they stay editor-friendly;
// the expected text is everything before it.
inline std::string read_fixture(const std::string& relative) {
  std::string text = read_file(fixture_path(relative));
  if (text.empty() || text.back() != '\n')
    throw std::runtime_error(relative + ": expected a trailing newline");
  text.pop_back();
  return text;
}

// "p3" -> "p3w1 p3w2 ... p3wN", one synthetic word per token
inline std::string script_words(const std::string& prefix, int n) {
  std::string out;
  for (int k = 1; k <= n; ++k) {
    if (k > 1) out += ' ';
    out += prefix + "w" + std::to_string(k);
  }
  return out;
}

inline staircase::AgentSpec sim_agent(const std::string& name,
                                      const std::string& script,
                                      double decode = 0.02,
                                      double overhead = 0.05,
                                      double prefill = 0.0005,
                                      unsigned long long seed = 0,
                                      double jitter_fraction = 0.0) {
  staircase::AgentSpec agent;
  agent.name = name;
  agent.backend.kind = staircase::BackendKind::simulated;
  agent.backend.script_text = script;
  agent.backend.latency.decode_seconds_per_token = decode;
  agent.backend.latency.fixed_overhead_seconds = overhead;
  agent.backend.latency.prefill_seconds_per_prompt_token = prefill;
  agent.backend.latency.jitter.seed = seed;
  agent.backend.latency.jitter.max_fraction = jitter_fraction;
  return agent;
}

// Mixture pipeline with n proposers of the given script lengths and one
// aggregator, zero jitter unless the caller tweaks it afterwards.
inline staircase::PipelineConfig basic_config(
    const std::vector<int>& proposer_tokens, int aggregator_tokens,
    const std::string& query = "Why do rivers meander?") {
  staircase::PipelineConfig config;
  config.query = query;
  for (std::size_t i = 0; i < proposer_tokens.size(); ++i) {
    std::string name = "p" + std::to_string(i + 1);
    config.proposers.push_back(
        sim_agent(name, script_words(name, proposer_tokens[i])));
  }
  config.aggregator =
      sim_agent("agg", script_words("agg", aggregator_tokens));
  config.schedule.redundancy = 0;
  return config;
}

}  // namespace test_support
