#include "staircase/events.hpp"

#include <nlohmann/json.hpp>

#include <istream>
#include <ostream>
#include <stdexcept>

namespace staircase {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::aggregator_delta: return "aggregator_delta";
    case EventKind::proposer_chunk_done: return "proposer_chunk_done";
    case EventKind::barrier_released: return "barrier_released";
    case EventKind::agent_error: return "agent_error";
    case EventKind::run_complete: return "run_complete";
  }
  return "unknown";
}

void to_json(nlohmann::json& j, const EngineEvent& e) {
  j = {{"kind", to_string(e.kind)},
       {"timestamp", e.timestamp},
       {"wall_timestamp", e.wall_timestamp}};
  switch (e.kind) {
    case EventKind::aggregator_delta:
      j["agent"] = e.agent;
      j["round"] = e.round;
      j["text"] = e.text;
      break;
    case EventKind::proposer_chunk_done:
      j["agent"] = e.agent;
      j["round"] = e.round;
      j["token_count"] = e.token_count;
      j["t_start"] = e.t_start;
      j["is_final"] = e.is_final;
      break;
    case EventKind::barrier_released:
      j["round"] = e.round;
      j["arrived"] = e.arrived;
      break;
    case EventKind::agent_error:
      j["agent"] = e.agent;
      j["error_kind"] = e.error_kind;
      j["error_message"] = e.error_message;
      break;
    case EventKind::run_complete:
      j["prompt_tokens"] = e.prompt_tokens;
      j["max_lag_seconds"] = e.max_lag_seconds;
      break;
  }
}

void from_json(const nlohmann::json& j, EngineEvent& e) {
  e = EngineEvent{};
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "aggregator_delta") e.kind = EventKind::aggregator_delta;
  else if (kind == "proposer_chunk_done") e.kind = EventKind::proposer_chunk_done;
  else if (kind == "barrier_released") e.kind = EventKind::barrier_released;
  else if (kind == "agent_error") e.kind = EventKind::agent_error;
  else if (kind == "run_complete") e.kind = EventKind::run_complete;
  else throw std::invalid_argument("unknown event kind: " + kind);
  e.timestamp = j.value("timestamp", 0.0);
  e.wall_timestamp = j.value("wall_timestamp", 0.0);
  e.agent = j.value("agent", std::string());
  e.round = j.value("round", 0);
  e.text = j.value("text", std::string());
  e.token_count = j.value("token_count", 0);
  e.t_start = j.value("t_start", 0.0);
  e.is_final = j.value("is_final", false);
  if (j.contains("arrived"))
    e.arrived = j.at("arrived").get<std::vector<std::string>>();
  e.error_kind = j.value("error_kind", std::string());
  e.error_message = j.value("error_message", std::string());
  e.prompt_tokens = j.value("prompt_tokens", 0ll);
  e.max_lag_seconds = j.value("max_lag_seconds", 0.0);
}

void write_events_jsonl(std::ostream& out,
                        const std::vector<EngineEvent>& events) {
  for (const EngineEvent& e : events) {
    nlohmann::json j = e;
    out << j.dump() << '\n';
  }
}

std::vector<EngineEvent> read_events_jsonl(std::istream& in) {
  std::vector<EngineEvent> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("kind")) continue;
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "aggregator_delta" || kind == "proposer_chunk_done" ||
        kind == "barrier_released" || kind == "agent_error" ||
        kind == "run_complete")
      out.push_back(j.get<EngineEvent>());
  }
  return out;
}

}  // namespace staircase
