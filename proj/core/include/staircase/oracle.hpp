#pragma once

#include <string>
#include <vector>

#include "staircase/engine.hpp"

namespace staircase {

// ============================================================
// Reference simulation
// ============================================================

// One generation round of the user-facing consumer as the reference
// simulation predicts it.
struct OracleRound {
  int round = 0;
  // True when the engine announces this round with a barrier event (the
  // closing catch-all round has none).
  bool barrier_event = false;
  double release_time = 0.0;
  std::vector<std::string> arrived;
  // The exact request prompt: rendered messages plus the accumulated answer
  // as a trailing assistant turn once one exists.
  std::vector<Message> prompt;
  int prompt_tokens = 0;
  int charged_prompt_tokens = 0;
  double s_start = 0.0;
  double s_end = 0.0;
  int tokens = 0;
};

struct OracleRun {
  std::vector<Chunk> chunks;  // producer chunks, sorted like a transcript
  std::vector<OracleRound> rounds;
  std::string final_text;
  double ttft_seconds = 0.0;
  double total_seconds = 0.0;
  int aggregator_token_count = 0;
  long long prompt_tokens_consumed = 0;
};

// Replays a fully simulated config on a single thread with no pacing,
// arriving at the exact chunk boundaries, barrier times, prompts, and token
// timestamps the concurrent engine must reproduce. Shares only the leaf
// arithmetic with the engine (event deadlines, tokenization, renderers);
// all sequencing is derived independently. Throws std::invalid_argument for
// configs with live backends or validation errors.
OracleRun oracle_simulate(const PipelineConfig& config, RunMode mode);

// ============================================================
// Transcript comparison
// ============================================================

struct CompareReport {
  // Largest |engine - reference| / max(|reference|, 1e-6) over every timing
  // comparison (chunk boundaries, barrier releases, round extents, time to
  // first token, total time), and which comparison produced it.
  double max_relative_deviation = 0.0;
  std::string worst_timing;
  // Byte or structural differences: prompts, texts, token counts, arrivals.
  std::vector<std::string> mismatches;

  bool within(double tolerance) const {
    return mismatches.empty() && max_relative_deviation <= tolerance;
  }
};

CompareReport compare_run(const OracleRun& reference,
                          const RunTranscript& transcript);

}  // namespace staircase
