#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "staircase/events.hpp"

namespace staircase {

// ============================================================
// Run metrics
// ============================================================

// Timing of a single aggregator round, in model seconds.
struct RoundTiming {
  int round = 0;
  double barrier_release = 0.0;  // when the round's inputs were released
  double s_start = 0.0;          // first delta of the round
  double s_end = 0.0;            // last delta of the round
};

struct RunMetrics {
  double ttft_seconds = 0.0;
  double tps = 0.0;  // user-facing tokens per second over the whole run
  int aggregator_token_count = 0;
  double total_wall_seconds = 0.0;
  std::vector<RoundTiming> per_round;
  long long prompt_tokens_consumed = 0;
};

void to_json(nlohmann::json& j, const RoundTiming& r);
void from_json(const nlohmann::json& j, RoundTiming& r);
void to_json(nlohmann::json& j, const RunMetrics& m);
void from_json(const nlohmann::json& j, RunMetrics& m);

// Computes metrics from an event transcript. Returns nullopt when the
// transcript contains no user-facing deltas (a failed run).
std::optional<RunMetrics> measure(const std::vector<EngineEvent>& events);

// ============================================================
// Closed-form time-to-first-token predictions
// ============================================================

// Arrival timing for one query: chunk_durations[i][j] is how long proposer i
// spends producing its j-th chunk, and prefill_seconds is the aggregator's
// prompt-processing delay once its inputs are ready.
struct TimingScenario {
  std::vector<std::vector<double>> chunk_durations;
  double prefill_seconds = 0.0;
};

// The aggregator waits for every proposer's complete response, so the first
// token lands at max_i(sum_j d[i][j]) + prefill.
double predict_ttft_normal(const TimingScenario& scenario);

// With chunked hand-off the aggregator starts once `quorum` first chunks have
// arrived: the quorum-th smallest d[i][0], plus prefill.
double predict_ttft_staircase(const TimingScenario& scenario, int quorum);

// ============================================================
// CSV output
// ============================================================

struct CsvRow {
  std::string run_id;
  std::string mode;
  std::string topology;
  int first_chunk_size = 0;
  int redundancy = 0;
  double ttft_s = 0.0;
  double tps = 0.0;
  int agg_tokens = 0;
  double wall_s = 0.0;
  long long prompt_tokens = 0;
};

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const CsvRow& row);

}  // namespace staircase
