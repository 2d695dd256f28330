#pragma once

#include <memory>
#include <string>
#include <vector>

#include "staircase/backend.hpp"

namespace staircase {

// Deterministic jitter draw in [0, 1), stable across platforms and shared
// by the simulated backend and the timing oracle. Each (agent, request,
// event) triple gets an independent value; event 0 perturbs the
// overhead+prefill delay, events 1..n the per-token decode gaps.
double jitter_unit(const JitterSpec& jitter, const std::string& agent,
                   int request_index, int event_index);

// Absolute model-time deadlines for the n token events of one request:
//   t_k = anchor + J0*(overhead + prefill*charged) + sum_{m<=k} Jm*decode
// with Jx = 1 + max_fraction * jitter_unit(...). Zero jitter collapses to
// the closed form anchor + overhead + prefill*charged + decode*k.
std::vector<double> sim_event_times(const LatencyModel& latency,
                                    const std::string& agent,
                                    int request_index, double anchor,
                                    int charged_prompt_tokens, int n_events);

// Replays a scripted response (one token per whitespace split) under a
// latency model. The continuation text must be exactly the token prefix this
// backend previously emitted; generation resumes at the next token. Event
// timestamps are exact model-time deadlines; emission is paced to the wall
// clock per the run clock's time_scale, and the worst wall lag behind a
// deadline is reported in the outcome.
class SimulatedBackend : public Backend {
 public:
  SimulatedBackend(std::string agent_name, std::vector<std::string> script,
                   LatencyModel latency,
                   std::shared_ptr<const RunClock> clock);

  StreamOutcome stream_generate(const GenerationRequest& request,
                                const TokenSink& sink) override;
  bool is_simulated() const override { return true; }

  int script_token_count() const { return static_cast<int>(script_.size()); }

 private:
  std::string agent_;
  std::vector<std::string> script_;
  std::vector<std::size_t> prefix_lengths_;  // byte length of first k tokens
  LatencyModel latency_;
  std::shared_ptr<const RunClock> clock_;
  int request_index_ = 0;
};

// Prompt size under the whitespace token model: all message contents plus
// the continuation text.
int prompt_token_count(const std::vector<Message>& messages,
                       const std::string& continuation_text);

}  // namespace staircase
