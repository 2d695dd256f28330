#pragma once

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

#include "staircase/schedule.hpp"

namespace staircase {

enum class Role { system, user, assistant };

struct Message {
  Role role = Role::user;
  std::string content;  // may be empty only as an assistant-continuation stub
};

// One generated slice of an agent's response. Rounds are 1-based and
// consecutive per agent; `is_final` marks the chunk that ended with the
// agent's natural end of response. Times are seconds on the run timeline
// (t = 0 when the pipeline received the query).
struct Chunk {
  std::string agent;
  int agent_index = 0;  // position in the proposer list (0-based)
  int round = 0;
  std::string text;
  int token_count = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  bool is_final = false;
};

struct SamplingParams {
  double temperature = 0.7;
  double top_p = 0.9;
  int max_total_tokens = 4096;
};

enum class BackendKind { simulated, http };

struct JitterSpec {
  unsigned long long seed = 0;
  double max_fraction = 0.0;  // in [0, 1): per-event delay inflation bound
};

struct LatencyModel {
  double prefill_seconds_per_prompt_token = 0.0005;
  double decode_seconds_per_token = 0.02;
  double fixed_overhead_seconds = 0.0;
  JitterSpec jitter;
};

// Where an agent's tokens come from. Simulated backends replay a scripted
// response under a latency model; http backends speak the OpenAI-compatible
// streaming chat-completions protocol. API keys are never stored here, only
// the name of the environment variable that holds one.
struct BackendRef {
  BackendKind kind = BackendKind::simulated;

  // simulated
  std::string script_text;  // inline script; wins over script_file if set
  std::string script_file;  // plain text, one token per whitespace split
  LatencyModel latency;

  // http
  std::string base_url;  // e.g. "https://api.example.com/v1"
  std::string model;
  std::string api_key_env;
  double timeout_seconds = 120.0;
  int max_retries = 1;  // transport retries before the first token (0 or 1)
  bool supports_assistant_prefill = true;
};

struct AgentSpec {
  std::string name;
  BackendRef backend;
  SamplingParams sampling;
};

enum class Topology { moa, moa_prefix_cache, mad };

struct PipelineConfig {
  std::string query;
  std::vector<AgentSpec> proposers;
  AgentSpec aggregator;
  Topology topology = Topology::moa;
  ChunkSchedule schedule;
  RedundancyScope redundancy_scope = RedundancyScope::first_round_only;
  double per_round_timeout = 30.0;  // seconds
  std::string mad_final_agent;      // required iff topology == mad
};

// ==========================================================================
// Validation: violations are data with stable codes, not exceptions.
// ==========================================================================

enum class ViolationCode {
  proposers_empty,
  duplicate_agent_name,
  redundancy_negative,
  redundancy_not_less_than_N,
  chunk_size_not_positive,
  per_round_timeout_not_positive,
  sampling_out_of_range,
  mad_final_agent_missing,
  mad_final_agent_unknown,
  backend_script_missing,
  backend_base_url_missing,
};

const char* to_string(ViolationCode code);

struct Violation {
  ViolationCode code;
  std::string detail;  // human-readable context (agent name, offending value)
};

std::vector<Violation> validate_config(const PipelineConfig& config);

// ==========================================================================
// Names and JSON
// ==========================================================================

const char* to_string(Role role);
const char* to_string(Topology topology);
const char* to_string(RedundancyScope scope);
const char* to_string(AgentRole role);

void to_json(nlohmann::json& j, const Message& m);
void from_json(const nlohmann::json& j, Message& m);
void to_json(nlohmann::json& j, const Chunk& c);
void from_json(const nlohmann::json& j, Chunk& c);
void to_json(nlohmann::json& j, const ChunkSchedule& s);
void from_json(const nlohmann::json& j, ChunkSchedule& s);
void to_json(nlohmann::json& j, const SamplingParams& s);
void from_json(const nlohmann::json& j, SamplingParams& s);
void to_json(nlohmann::json& j, const BackendRef& b);
void from_json(const nlohmann::json& j, BackendRef& b);
void to_json(nlohmann::json& j, const AgentSpec& a);
void from_json(const nlohmann::json& j, AgentSpec& a);
void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);

}  // namespace staircase
