#include "staircase/model.hpp"

#include <nlohmann/json.hpp>

#include <set>
#include <stdexcept>

namespace staircase {

namespace {

template <typename T>
T enum_from_string(const std::string& s,
                   std::initializer_list<std::pair<const char*, T>> table,
                   const char* what) {
  for (const auto& [name, value] : table)
    if (s == name) return value;
  throw std::invalid_argument(std::string("unknown ") + what + ": " + s);
}

void check_sampling(const AgentSpec& agent, std::vector<Violation>& out) {
  const SamplingParams& s = agent.sampling;
  if (s.temperature < 0.0 || s.top_p <= 0.0 || s.top_p > 1.0 ||
      s.max_total_tokens < 1)
    out.push_back({ViolationCode::sampling_out_of_range, agent.name});
}

void check_backend(const AgentSpec& agent, std::vector<Violation>& out) {
  const BackendRef& b = agent.backend;
  if (b.kind == BackendKind::simulated) {
    if (b.script_text.empty() && b.script_file.empty())
      out.push_back({ViolationCode::backend_script_missing, agent.name});
  } else {
    if (b.base_url.empty())
      out.push_back({ViolationCode::backend_base_url_missing, agent.name});
  }
}

}  // namespace

std::vector<Violation> validate_config(const PipelineConfig& config) {
  std::vector<Violation> out;

  if (config.proposers.empty())
    out.push_back({ViolationCode::proposers_empty, ""});

  std::set<std::string> names;
  for (const AgentSpec& p : config.proposers) {
    if (!names.insert(p.name).second)
      out.push_back({ViolationCode::duplicate_agent_name, p.name});
    check_sampling(p, out);
    check_backend(p, out);
  }
  check_sampling(config.aggregator, out);
  check_backend(config.aggregator, out);

  const ChunkSchedule& s = config.schedule;
  if (s.redundancy < 0)
    out.push_back({ViolationCode::redundancy_negative,
                   std::to_string(s.redundancy)});
  else if (!config.proposers.empty() &&
           s.redundancy >= static_cast<int>(config.proposers.size()))
    out.push_back({ViolationCode::redundancy_not_less_than_N,
                   std::to_string(s.redundancy)});
  for (int size : {s.first_chunk_size, s.second_chunk_size, s.chunk_size,
                   s.aggregator_chunk_size})
    if (size < 1) {
      out.push_back({ViolationCode::chunk_size_not_positive,
                     std::to_string(size)});
      break;
    }

  if (!(config.per_round_timeout > 0.0))
    out.push_back({ViolationCode::per_round_timeout_not_positive,
                   std::to_string(config.per_round_timeout)});

  if (config.topology == Topology::mad) {
    if (config.mad_final_agent.empty()) {
      out.push_back({ViolationCode::mad_final_agent_missing, ""});
    } else if (!names.count(config.mad_final_agent)) {
      out.push_back(
          {ViolationCode::mad_final_agent_unknown, config.mad_final_agent});
    }
  }
  return out;
}

const char* to_string(ViolationCode code) {
  switch (code) {
    case ViolationCode::proposers_empty: return "proposers_empty";
    case ViolationCode::duplicate_agent_name: return "duplicate_agent_name";
    case ViolationCode::redundancy_negative: return "redundancy_negative";
    case ViolationCode::redundancy_not_less_than_N:
      return "redundancy_not_less_than_N";
    case ViolationCode::chunk_size_not_positive:
      return "chunk_size_not_positive";
    case ViolationCode::per_round_timeout_not_positive:
      return "per_round_timeout_not_positive";
    case ViolationCode::sampling_out_of_range: return "sampling_out_of_range";
    case ViolationCode::mad_final_agent_missing:
      return "mad_final_agent_missing";
    case ViolationCode::mad_final_agent_unknown:
      return "mad_final_agent_unknown";
    case ViolationCode::backend_script_missing:
      return "backend_script_missing";
    case ViolationCode::backend_base_url_missing:
      return "backend_base_url_missing";
  }
  return "unknown";
}

const char* to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "unknown";
}

const char* to_string(Topology topology) {
  switch (topology) {
    case Topology::moa: return "moa";
    case Topology::moa_prefix_cache: return "moa_prefix_cache";
    case Topology::mad: return "mad";
  }
  return "unknown";
}

const char* to_string(RedundancyScope scope) {
  return scope == RedundancyScope::first_round_only ? "first_round_only"
                                                    : "all_rounds";
}

const char* to_string(AgentRole role) {
  return role == AgentRole::proposer ? "proposer" : "aggregator";
}

// ==========================================================================
// JSON (field names are part of the external interface; keep them stable)
// ==========================================================================

void to_json(nlohmann::json& j, const Message& m) {
  j = {{"role", to_string(m.role)}, {"content", m.content}};
}

void from_json(const nlohmann::json& j, Message& m) {
  m.role = enum_from_string<Role>(j.at("role").get<std::string>(),
                                  {{"system", Role::system},
                                   {"user", Role::user},
                                   {"assistant", Role::assistant}},
                                  "role");
  m.content = j.at("content").get<std::string>();
}

void to_json(nlohmann::json& j, const Chunk& c) {
  j = {{"agent", c.agent},         {"agent_index", c.agent_index},
       {"round", c.round},         {"text", c.text},
       {"token_count", c.token_count}, {"t_start", c.t_start},
       {"t_end", c.t_end},         {"is_final", c.is_final}};
}

void from_json(const nlohmann::json& j, Chunk& c) {
  c.agent = j.at("agent").get<std::string>();
  c.agent_index = j.value("agent_index", 0);
  c.round = j.at("round").get<int>();
  c.text = j.at("text").get<std::string>();
  c.token_count = j.value("token_count", 0);
  c.t_start = j.value("t_start", 0.0);
  c.t_end = j.value("t_end", 0.0);
  c.is_final = j.value("is_final", false);
}

void to_json(nlohmann::json& j, const ChunkSchedule& s) {
  j = {{"first_chunk_size", s.first_chunk_size},
       {"second_chunk_size", s.second_chunk_size},
       {"chunk_size", s.chunk_size},
       {"aggregator_chunk_size", s.aggregator_chunk_size},
       {"redundancy", s.redundancy}};
}

void from_json(const nlohmann::json& j, ChunkSchedule& s) {
  ChunkSchedule defaults;
  s.first_chunk_size = j.value("first_chunk_size", defaults.first_chunk_size);
  s.second_chunk_size =
      j.value("second_chunk_size", defaults.second_chunk_size);
  s.chunk_size = j.value("chunk_size", defaults.chunk_size);
  s.aggregator_chunk_size =
      j.value("aggregator_chunk_size", defaults.aggregator_chunk_size);
  s.redundancy = j.value("redundancy", defaults.redundancy);
}

void to_json(nlohmann::json& j, const SamplingParams& s) {
  j = {{"temperature", s.temperature},
       {"top_p", s.top_p},
       {"max_total_tokens", s.max_total_tokens}};
}

void from_json(const nlohmann::json& j, SamplingParams& s) {
  SamplingParams defaults;
  s.temperature = j.value("temperature", defaults.temperature);
  s.top_p = j.value("top_p", defaults.top_p);
  s.max_total_tokens = j.value("max_total_tokens", defaults.max_total_tokens);
}

void to_json(nlohmann::json& j, const BackendRef& b) {
  if (b.kind == BackendKind::simulated) {
    j = {{"type", "simulated"},
         {"latency",
          {{"prefill_seconds_per_prompt_token",
            b.latency.prefill_seconds_per_prompt_token},
           {"decode_seconds_per_token", b.latency.decode_seconds_per_token},
           {"fixed_overhead_seconds", b.latency.fixed_overhead_seconds},
           {"jitter",
            {{"seed", b.latency.jitter.seed},
             {"max_fraction", b.latency.jitter.max_fraction}}}}}};
    if (!b.script_text.empty()) j["script_text"] = b.script_text;
    if (!b.script_file.empty()) j["script_file"] = b.script_file;
  } else {
    j = {{"type", "http"},
         {"base_url", b.base_url},
         {"model", b.model},
         {"api_key_env", b.api_key_env},
         {"timeout_seconds", b.timeout_seconds},
         {"max_retries", b.max_retries},
         {"supports_assistant_prefill", b.supports_assistant_prefill}};
  }
}

void from_json(const nlohmann::json& j, BackendRef& b) {
  b = BackendRef{};
  b.kind = enum_from_string<BackendKind>(
      j.at("type").get<std::string>(),
      {{"simulated", BackendKind::simulated}, {"http", BackendKind::http}},
      "backend type");
  if (b.kind == BackendKind::simulated) {
    b.script_text = j.value("script_text", std::string());
    b.script_file = j.value("script_file", std::string());
    if (j.contains("latency")) {
      const nlohmann::json& l = j.at("latency");
      LatencyModel defaults;
      b.latency.prefill_seconds_per_prompt_token =
          l.value("prefill_seconds_per_prompt_token",
                  defaults.prefill_seconds_per_prompt_token);
      b.latency.decode_seconds_per_token = l.value(
          "decode_seconds_per_token", defaults.decode_seconds_per_token);
      b.latency.fixed_overhead_seconds =
          l.value("fixed_overhead_seconds", defaults.fixed_overhead_seconds);
      if (l.contains("jitter")) {
        b.latency.jitter.seed = l.at("jitter").value("seed", 0ull);
        b.latency.jitter.max_fraction =
            l.at("jitter").value("max_fraction", 0.0);
      }
    }
  } else {
    b.base_url = j.at("base_url").get<std::string>();
    b.model = j.value("model", std::string());
    b.api_key_env = j.value("api_key_env", std::string());
    b.timeout_seconds = j.value("timeout_seconds", 120.0);
    b.max_retries = j.value("max_retries", 1);
    b.supports_assistant_prefill = j.value("supports_assistant_prefill", true);
  }
}

void to_json(nlohmann::json& j, const AgentSpec& a) {
  j = {{"name", a.name}, {"backend", a.backend}, {"sampling", a.sampling}};
}

void from_json(const nlohmann::json& j, AgentSpec& a) {
  a.name = j.at("name").get<std::string>();
  a.backend = j.at("backend").get<BackendRef>();
  a.sampling = j.value("sampling", SamplingParams{});
}

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = {{"query", c.query},
       {"proposers", c.proposers},
       {"aggregator", c.aggregator},
       {"topology", to_string(c.topology)},
       {"schedule", c.schedule},
       {"redundancy_scope", to_string(c.redundancy_scope)},
       {"per_round_timeout", c.per_round_timeout}};
  if (!c.mad_final_agent.empty()) j["mad_final_agent"] = c.mad_final_agent;
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
  c = PipelineConfig{};
  c.query = j.at("query").get<std::string>();
  c.proposers = j.at("proposers").get<std::vector<AgentSpec>>();
  c.aggregator = j.at("aggregator").get<AgentSpec>();
  c.topology = enum_from_string<Topology>(
      j.value("topology", "moa"),
      {{"moa", Topology::moa},
       {"moa_prefix_cache", Topology::moa_prefix_cache},
       {"mad", Topology::mad}},
      "topology");
  c.schedule = j.value("schedule", ChunkSchedule{});
  c.redundancy_scope = enum_from_string<RedundancyScope>(
      j.value("redundancy_scope", "first_round_only"),
      {{"first_round_only", RedundancyScope::first_round_only},
       {"all_rounds", RedundancyScope::all_rounds}},
      "redundancy_scope");
  c.per_round_timeout = j.value("per_round_timeout", 30.0);
  c.mad_final_agent = j.value("mad_final_agent", std::string());
}

}  // namespace staircase
