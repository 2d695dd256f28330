#pragma once

#include <nlohmann/json_fwd.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace staircase {

enum class EventKind {
  aggregator_delta,
  proposer_chunk_done,
  barrier_released,
  agent_error,
  run_complete,
};

const char* to_string(EventKind kind);

// One engine observation, flat across kinds (unused fields stay at their
// defaults and are omitted from JSON). `timestamp` is run-timeline seconds
// as reported by the producing backend; `wall_timestamp` is the real time
// the engine emitted the event, for fidelity checks against paced runs.
struct EngineEvent {
  EventKind kind = EventKind::run_complete;
  double timestamp = 0.0;
  double wall_timestamp = 0.0;

  std::string agent;  // aggregator_delta, proposer_chunk_done, agent_error
  int round = 0;      // aggregator_delta, proposer_chunk_done, barrier_released

  std::string text;  // aggregator_delta

  int token_count = 0;    // proposer_chunk_done
  double t_start = 0.0;   // proposer_chunk_done
  bool is_final = false;  // proposer_chunk_done

  std::vector<std::string> arrived;  // barrier_released: quorum members

  std::string error_kind;     // agent_error
  std::string error_message;  // agent_error

  long long prompt_tokens = 0;    // run_complete: charged prompt tokens
  double max_lag_seconds = 0.0;   // run_complete
};

void to_json(nlohmann::json& j, const EngineEvent& e);
void from_json(const nlohmann::json& j, EngineEvent& e);

// JSON-lines capture and replay. Lines that are not engine events (for
// example a leading config record) are skipped on read.
void write_events_jsonl(std::ostream& out,
                        const std::vector<EngineEvent>& events);
std::vector<EngineEvent> read_events_jsonl(std::istream& in);

}  // namespace staircase
