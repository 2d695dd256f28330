#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "staircase/backend.hpp"
#include "staircase/engine.hpp"
#include "staircase/oracle.hpp"
#include "staircase/sse.hpp"
#include "staircase/templates.hpp"

using namespace staircase;

namespace {

// ============================================================
// Workload builders
// ============================================================

std::string words(const std::string& prefix, int n) {
  std::string out;
  for (int k = 1; k <= n; ++k) {
    if (k > 1) out += ' ';
    out += prefix + std::to_string(k);
  }
  return out;
}

// A ledger the size a mid-run aggregator would see: n agents, `rounds`
// chunks each of ~24 tokens.
ChunkLedger make_ledger(int n, int rounds) {
  std::vector<std::string> names;
  for (int i = 1; i <= n; ++i) names.push_back("model" + std::to_string(i));
  ChunkLedger ledger(std::move(names));
  for (int round = 1; round <= rounds; ++round) {
    for (int agent = 0; agent < n; ++agent) {
      std::string text = words("w" + std::to_string(agent), 24);
      ledger.record(agent, round, round == 1 ? text : " " + text);
    }
    ledger.seal_render();
  }
  return ledger;
}

PipelineConfig small_pipeline() {
  PipelineConfig config;
  config.query = "Why does ice float on water?";
  for (int i = 1; i <= 4; ++i) {
    AgentSpec p;
    p.name = "p" + std::to_string(i);
    p.backend.script_text = words("p" + std::to_string(i) + "w", 160 + 40 * i);
    p.backend.latency.fixed_overhead_seconds = 0.05;
    config.proposers.push_back(std::move(p));
  }
  config.aggregator.name = "agg";
  config.aggregator.backend.script_text = words("aggw", 200);
  config.aggregator.backend.latency.fixed_overhead_seconds = 0.05;
  config.schedule.redundancy = 1;
  return config;
}

// 120 data frames of a chat completion stream plus the terminator.
std::string sse_stream() {
  std::string out;
  for (int i = 0; i < 120; ++i) {
    out += "data: {\"choices\":[{\"index\":0,\"delta\":{\"content\":\" tok" +
           std::to_string(i) + "\"}}]}\n\n";
  }
  out += "data: [DONE]\n\n";
  return out;
}

// ============================================================
// Benchmarks
// ============================================================

void BM_RenderMoa(benchmark::State& state) {
  ChunkLedger ledger = make_ledger(4, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto messages = render_moa(ledger, "Why does ice float on water?");
    benchmark::DoNotOptimize(messages);
  }
}
BENCHMARK(BM_RenderMoa)->Arg(1)->Arg(6);

void BM_RenderPrefixCache(benchmark::State& state) {
  ChunkLedger ledger = make_ledger(4, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto messages =
        render_moa_prefix_cache(ledger, "Why does ice float on water?");
    benchmark::DoNotOptimize(messages);
  }
}
BENCHMARK(BM_RenderPrefixCache)->Arg(1)->Arg(6);

void BM_RenderMad(benchmark::State& state) {
  ChunkLedger ledger = make_ledger(4, 6);
  for (auto _ : state) {
    auto messages = render_mad(ledger, 0, "Why does ice float on water?");
    benchmark::DoNotOptimize(messages);
  }
}
BENCHMARK(BM_RenderMad);

void BM_SseParse(benchmark::State& state) {
  const std::string stream = sse_stream();
  const std::size_t step = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    SseParser parser;
    std::vector<std::string> events;
    for (std::size_t at = 0; at < stream.size(); at += step) {
      parser.feed(std::string_view(stream).substr(at, step), events);
    }
    benchmark::DoNotOptimize(events);
  }
  state.SetBytesProcessed(static_cast<long long>(state.iterations()) *
                          static_cast<long long>(stream.size()));
}
BENCHMARK(BM_SseParse)->Arg(17)->Arg(4096);

void BM_TokenSplit(benchmark::State& state) {
  const std::string text = words("token", 400);
  for (auto _ : state) {
    auto tokens = split_tokens(text);
    benchmark::DoNotOptimize(tokens);
  }
}
BENCHMARK(BM_TokenSplit);

void BM_OracleSimulate(benchmark::State& state) {
  PipelineConfig config = small_pipeline();
  for (auto _ : state) {
    OracleRun run = oracle_simulate(config, RunMode::staircase);
    benchmark::DoNotOptimize(run);
  }
}
BENCHMARK(BM_OracleSimulate);

void BM_EngineFastRun(benchmark::State& state) {
  PipelineConfig config = small_pipeline();
  RunOptions options;
  options.time_scale = 0.0;
  for (auto _ : state) {
    RunResult result = run_pipeline(config, RunMode::staircase, options);
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(BM_EngineFastRun)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
