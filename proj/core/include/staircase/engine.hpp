#pragma once

#include <functional>
#include <string>

#include "staircase/model.hpp"
#include "staircase/transcript.hpp"

namespace staircase {

// ============================================================
// Pipeline engine
// ============================================================

enum class RunMode {
  // Chunked hand-off: the consumer starts as soon as a quorum of first
  // chunks has arrived and keeps interleaving generation with barrier waits.
  staircase,
  // Sequential baseline: every producer finishes its complete response
  // before the consumer sees anything.
  normal,
};

const char* to_string(RunMode mode);

struct RunOptions {
  // Wall pacing for simulated backends: 1.0 replays the model timeline in
  // real time, 0.0 runs as fast as possible, values in between compress it.
  double time_scale = 1.0;
  // Paced runs only: after a quorum forms, the barrier lingers this many
  // wall seconds so near-simultaneous chunks land in the same snapshot.
  double barrier_grace_seconds = 0.002;
  // Called for every engine event in emission order (serialized).
  std::function<void(const EngineEvent&)> on_event;
};

struct RunResult {
  bool ok = false;
  std::string error;
  RunTranscript transcript;
};

// Executes one query through the configured topology. The config must pass
// validate_config; violations are reported as a failed result, not thrown.
RunResult run_pipeline(const PipelineConfig& config, RunMode mode,
                       const RunOptions& options = {});

}  // namespace staircase
