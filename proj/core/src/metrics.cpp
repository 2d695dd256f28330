#include "staircase/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>

namespace staircase {

// ============================================================
// JSON
// ============================================================

void to_json(nlohmann::json& j, const RoundTiming& r) {
  j = {{"round", r.round},
       {"barrier_release", r.barrier_release},
       {"s_start", r.s_start},
       {"s_end", r.s_end}};
}

void from_json(const nlohmann::json& j, RoundTiming& r) {
  r.round = j.value("round", 0);
  r.barrier_release = j.value("barrier_release", 0.0);
  r.s_start = j.value("s_start", 0.0);
  r.s_end = j.value("s_end", 0.0);
}

void to_json(nlohmann::json& j, const RunMetrics& m) {
  j = {{"ttft_seconds", m.ttft_seconds},
       {"tps", m.tps},
       {"aggregator_token_count", m.aggregator_token_count},
       {"total_wall_seconds", m.total_wall_seconds},
       {"per_round", m.per_round},
       {"prompt_tokens_consumed", m.prompt_tokens_consumed}};
}

void from_json(const nlohmann::json& j, RunMetrics& m) {
  m.ttft_seconds = j.value("ttft_seconds", 0.0);
  m.tps = j.value("tps", 0.0);
  m.aggregator_token_count = j.value("aggregator_token_count", 0);
  m.total_wall_seconds = j.value("total_wall_seconds", 0.0);
  m.per_round.clear();
  if (j.contains("per_round"))
    m.per_round = j.at("per_round").get<std::vector<RoundTiming>>();
  m.prompt_tokens_consumed = j.value("prompt_tokens_consumed", 0ll);
}

// ============================================================
// measure
// ============================================================

std::optional<RunMetrics> measure(const std::vector<EngineEvent>& events) {
  RunMetrics m;
  bool any_delta = false;
  double first_delta = std::numeric_limits<double>::infinity();
  double last_delta = 0.0;

  // Per-round delta extents, keyed by round number.
  struct Extent {
    double start = std::numeric_limits<double>::infinity();
    double end = 0.0;
  };
  std::map<int, Extent> extents;
  std::map<int, double> releases;

  for (const EngineEvent& e : events) {
    switch (e.kind) {
      case EventKind::aggregator_delta: {
        any_delta = true;
        ++m.aggregator_token_count;
        first_delta = std::min(first_delta, e.timestamp);
        last_delta = std::max(last_delta, e.timestamp);
        Extent& x = extents[e.round];
        x.start = std::min(x.start, e.timestamp);
        x.end = std::max(x.end, e.timestamp);
        break;
      }
      case EventKind::barrier_released:
        releases[e.round] = e.timestamp;
        break;
      case EventKind::run_complete:
        m.prompt_tokens_consumed = e.prompt_tokens;
        break;
      default:
        break;
    }
  }
  if (!any_delta) return std::nullopt;

  m.ttft_seconds = first_delta;
  m.total_wall_seconds = last_delta;
  m.tps = last_delta > 0.0 ? m.aggregator_token_count / last_delta : 0.0;
  for (const auto& [round, x] : extents) {
    RoundTiming rt;
    rt.round = round;
    auto it = releases.find(round);
    rt.barrier_release = it != releases.end() ? it->second : x.start;
    rt.s_start = x.start;
    rt.s_end = x.end;
    m.per_round.push_back(rt);
  }
  return m;
}

// ============================================================
// Predictions
// ============================================================

double predict_ttft_normal(const TimingScenario& scenario) {
  if (scenario.chunk_durations.empty())
    throw std::invalid_argument("scenario has no proposers");
  double slowest = 0.0;
  for (const auto& row : scenario.chunk_durations) {
    if (row.empty()) throw std::invalid_argument("proposer with no chunks");
    double total = 0.0;
    for (double d : row) total += d;
    slowest = std::max(slowest, total);
  }
  return slowest + scenario.prefill_seconds;
}

double predict_ttft_staircase(const TimingScenario& scenario, int quorum) {
  const int n = static_cast<int>(scenario.chunk_durations.size());
  if (n == 0) throw std::invalid_argument("scenario has no proposers");
  if (quorum < 1 || quorum > n)
    throw std::invalid_argument("quorum out of range");
  std::vector<double> firsts;
  firsts.reserve(scenario.chunk_durations.size());
  for (const auto& row : scenario.chunk_durations) {
    if (row.empty()) throw std::invalid_argument("proposer with no chunks");
    firsts.push_back(row.front());
  }
  std::nth_element(firsts.begin(), firsts.begin() + (quorum - 1), firsts.end());
  return firsts[quorum - 1] + scenario.prefill_seconds;
}

// ============================================================
// CSV
// ============================================================

void write_csv_header(std::ostream& out) {
  out << "run_id,mode,topology,first_chunk_size,redundancy,ttft_s,tps,"
         "agg_tokens,wall_s,prompt_tokens\n";
}

void write_csv_row(std::ostream& out, const CsvRow& row) {
  char buf[64];
  out << row.run_id << ',' << row.mode << ',' << row.topology << ','
      << row.first_chunk_size << ',' << row.redundancy << ',';
  std::snprintf(buf, sizeof(buf), "%.6f", row.ttft_s);
  out << buf << ',';
  std::snprintf(buf, sizeof(buf), "%.6f", row.tps);
  out << buf << ',' << row.agg_tokens << ',';
  std::snprintf(buf, sizeof(buf), "%.6f", row.wall_s);
  out << buf << ',' << row.prompt_tokens << '\n';
}

}  // namespace staircase
