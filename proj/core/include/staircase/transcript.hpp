#pragma once

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

#include "staircase/events.hpp"
#include "staircase/metrics.hpp"
#include "staircase/model.hpp"

namespace staircase {

// ============================================================
// Run transcript
// ============================================================

// The exact prompt handed to the aggregator for one generation round.
struct RoundPrompt {
  int round = 0;
  std::vector<Message> messages;
};

// Everything a run produced, in a replayable form: the resolved config, all
// proposer chunks, every aggregator prompt, the stitched output text, the
// derived metrics, and the raw event stream.
struct RunTranscript {
  PipelineConfig config;
  std::string mode;  // "staircase" or "normal"
  std::vector<Chunk> chunks;
  std::vector<RoundPrompt> aggregator_prompts;
  std::string final_text;
  std::optional<RunMetrics> metrics;
  std::vector<EngineEvent> events;
};

// Orders chunks by completion time, then producer index, then round, so
// serialized transcripts are byte-stable across runs of the same config.
void sort_chunks(std::vector<Chunk>& chunks);

void to_json(nlohmann::json& j, const RoundPrompt& p);
void from_json(const nlohmann::json& j, RoundPrompt& p);
void to_json(nlohmann::json& j, const RunTranscript& t);
void from_json(const nlohmann::json& j, RunTranscript& t);

}  // namespace staircase
