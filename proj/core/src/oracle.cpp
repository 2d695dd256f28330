#include "staircase/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <tuple>

#include "staircase/backend.hpp"
#include "staircase/sim_backend.hpp"
#include "staircase/templates.hpp"

namespace staircase {

namespace {

// ============================================================
// Producer side
// ============================================================

struct SimAgent {
  std::string name;
  std::vector<std::string> script;
  LatencyModel latency;
  SamplingParams sampling;
};

struct ProducerSim {
  std::vector<Chunk> chunks;  // rounds 1..final_round
  int final_round = 0;
  long long charged_prompt_tokens = 0;
};

// The chunked producer chain: round sizes from the schedule, each request
// anchored at the end of the previous chunk, prompt = query + own
// continuation.
ProducerSim simulate_producer_chain(const SimAgent& agent, int index,
                                    const std::string& query,
                                    const ChunkSchedule& schedule) {
  ProducerSim sim;
  const int script_len = static_cast<int>(agent.script.size());
  const int query_tokens = count_tokens(query);
  int k0 = 0;
  int generated = 0;
  double prev_end = 0.0;
  for (int round = 1;; ++round) {
    const int budget =
        std::min(chunk_size(schedule, AgentRole::proposer, round),
                 agent.sampling.max_total_tokens - generated);
    if (budget < 1) break;
    const int n = std::min(budget, script_len - k0);
    if (n < 1) break;
    const int prompt = query_tokens + count_tokens(join_tokens(
                                          agent.script, 0,
                                          static_cast<std::size_t>(k0)));
    sim.charged_prompt_tokens += prompt;
    const std::vector<double> times = sim_event_times(
        agent.latency, agent.name, round - 1, prev_end, prompt, n);

    Chunk c;
    c.agent = agent.name;
    c.agent_index = index;
    c.round = round;
    c.text = join_tokens(agent.script, static_cast<std::size_t>(k0),
                         static_cast<std::size_t>(k0 + n));
    c.token_count = n;
    c.t_start = prev_end;
    c.t_end = times.back();
    k0 += n;
    generated += n;
    prev_end = c.t_end;
    c.is_final = k0 == script_len ||
                 generated >= agent.sampling.max_total_tokens;
    sim.chunks.push_back(c);
    sim.final_round = round;
    if (c.is_final) break;
  }
  return sim;
}

// The baseline producer: one request for the complete response.
ProducerSim simulate_producer_full(const SimAgent& agent, int index,
                                   const std::string& query) {
  ProducerSim sim;
  const int n = std::min(static_cast<int>(agent.script.size()),
                         agent.sampling.max_total_tokens);
  if (n < 1) return sim;
  const int prompt = count_tokens(query);
  sim.charged_prompt_tokens = prompt;
  const std::vector<double> times =
      sim_event_times(agent.latency, agent.name, 0, 0.0, prompt, n);
  Chunk c;
  c.agent = agent.name;
  c.agent_index = index;
  c.round = 1;
  c.text = join_tokens(agent.script, 0, static_cast<std::size_t>(n));
  c.token_count = n;
  c.t_start = 0.0;
  c.t_end = times.back();
  c.is_final = true;
  sim.chunks.push_back(c);
  sim.final_round = 1;
  return sim;
}

// ============================================================
// Consumer side
// ============================================================

struct ConsumerSim {
  // Identity used for the consumer's jitter stream (a debater's second
  // backend instance carries a suffix).
  std::string sim_identity;
  SimAgent agent;
  int self_index = -1;  // excluded from the quorum
  bool prefix_cache = false;
  std::function<std::vector<Message>(const ChunkLedger&)> render;
};

int message_tokens(const std::vector<Message>& messages) {
  int n = 0;
  for (const Message& m : messages) n += count_tokens(m.content);
  return n;
}

void simulate_consumer(const std::vector<ProducerSim>& producers,
                       const std::vector<std::string>& names,
                       const ChunkSchedule& schedule, RedundancyScope scope,
                       const ConsumerSim& consumer, OracleRun& out) {
  ChunkLedger ledger(names);
  std::vector<std::size_t> recorded(names.size(), 0);
  const std::vector<std::string>& script = consumer.agent.script;
  const int script_len = static_cast<int>(script.size());
  std::string prev_system;
  std::string text;
  int tokens = 0;
  int k0 = 0;
  double ready = 0.0;

  auto record_until = [&](double release) {
    std::vector<const Chunk*> fresh;
    for (std::size_t i = 0; i < producers.size(); ++i) {
      const std::vector<Chunk>& chunks = producers[i].chunks;
      std::size_t k = recorded[i];
      while (k < chunks.size() && chunks[k].t_end <= release) {
        fresh.push_back(&chunks[k]);
        ++k;
      }
      recorded[i] = k;
    }
    std::sort(fresh.begin(), fresh.end(),
              [](const Chunk* a, const Chunk* b) {
                return std::tie(a->round, a->agent_index) <
                       std::tie(b->round, b->agent_index);
              });
    for (const Chunk* c : fresh)
      ledger.record(static_cast<std::size_t>(c->agent_index), c->round,
                    c->text);
  };
  auto record_all = [&] {
    std::vector<const Chunk*> fresh;
    for (std::size_t i = 0; i < producers.size(); ++i) {
      for (std::size_t k = recorded[i]; k < producers[i].chunks.size(); ++k)
        fresh.push_back(&producers[i].chunks[k]);
      recorded[i] = producers[i].chunks.size();
    }
    std::sort(fresh.begin(), fresh.end(),
              [](const Chunk* a, const Chunk* b) {
                return std::tie(a->round, a->agent_index) <
                       std::tie(b->round, b->agent_index);
              });
    for (const Chunk* c : fresh)
      ledger.record(static_cast<std::size_t>(c->agent_index), c->round,
                    c->text);
  };

  for (int round = 1;; ++round) {
    std::vector<int> active;
    for (std::size_t i = 0; i < producers.size(); ++i) {
      if (static_cast<int>(i) == consumer.self_index) continue;
      if (producers[i].final_round >= round)
        active.push_back(static_cast<int>(i));
    }

    OracleRound r;
    r.round = round;
    bool unbounded = false;
    double release = ready;
    if (active.empty()) {
      record_all();
      unbounded = true;
    } else {
      const int q = quorum(static_cast<int>(active.size()), schedule, scope,
                           round);
      std::vector<std::pair<double, int>> ends;
      for (int i : active)
        ends.emplace_back(
            producers[static_cast<std::size_t>(i)]
                .chunks[static_cast<std::size_t>(round - 1)]
                .t_end,
            i);
      std::sort(ends.begin(), ends.end());
      // A debater additionally waits for its own slice of the round.
      double self_end = -1.0;
      if (consumer.self_index >= 0) {
        const ProducerSim& self =
            producers[static_cast<std::size_t>(consumer.self_index)];
        if (self.final_round >= round)
          self_end = self.chunks[static_cast<std::size_t>(round - 1)].t_end;
      }
      release = std::max(
          {ready, ends[static_cast<std::size_t>(q - 1)].first, self_end});
      record_until(release);
      r.barrier_event = true;
      r.release_time = release;
      for (std::size_t i = 0; i < producers.size(); ++i) {
        const std::vector<Chunk>& chunks = producers[i].chunks;
        if (static_cast<int>(chunks.size()) >= round &&
            chunks[static_cast<std::size_t>(round - 1)].t_end <= release)
          r.arrived.push_back(names[i]);
      }
      unbounded = true;
      for (const ProducerSim& p : producers) {
        if (p.chunks.empty()) continue;
        if (p.chunks.back().t_end > release) {
          unbounded = false;
          break;
        }
      }
    }

    const int remaining = consumer.agent.sampling.max_total_tokens - tokens;
    if (remaining < 1) {
      if (r.barrier_event) out.rounds.push_back(std::move(r));
      break;
    }

    ledger.seal_render();
    std::vector<Message> messages = consumer.render(ledger);

    const int bound =
        unbounded ? remaining
                  : std::min(chunk_size(schedule, AgentRole::aggregator,
                                        round),
                             remaining);
    const int n = std::min(bound, script_len - k0);
    r.prompt_tokens = message_tokens(messages) + count_tokens(text);
    int cached = 0;
    if (consumer.prefix_cache)
      cached = std::min(count_tokens(prev_system), r.prompt_tokens);
    r.charged_prompt_tokens = r.prompt_tokens - cached;
    if (!messages.empty() && messages.front().role == Role::system)
      prev_system = messages.front().content;

    r.prompt = messages;
    if (!text.empty()) r.prompt.push_back({Role::assistant, text});

    const std::vector<double> times =
        sim_event_times(consumer.agent.latency, consumer.sim_identity,
                        round - 1, release, r.charged_prompt_tokens, n);
    r.s_start = times.front();
    r.s_end = times.back();
    r.tokens = n;
    out.prompt_tokens_consumed += r.charged_prompt_tokens;

    text += join_tokens(script, static_cast<std::size_t>(k0),
                        static_cast<std::size_t>(k0 + n));
    k0 += n;
    tokens += n;
    out.rounds.push_back(std::move(r));

    const bool end_of_response = k0 == script_len;
    if (end_of_response || unbounded) break;
    ready = times.back();
  }

  out.final_text = text;
  out.aggregator_token_count = tokens;
  if (!out.rounds.empty() && out.rounds.front().tokens > 0) {
    out.ttft_seconds = out.rounds.front().s_start;
    for (const OracleRound& r : out.rounds)
      if (r.tokens > 0) out.total_seconds = r.s_end;
  }
}

// One render over complete responses, one unbounded call (the baseline
// consumer).
void simulate_consumer_once(const std::vector<ProducerSim>& producers,
                            const std::vector<std::string>& names,
                            const ConsumerSim& consumer, OracleRun& out) {
  ChunkLedger ledger(names);
  double release = 0.0;
  OracleRound r;
  r.round = 1;
  r.barrier_event = true;
  for (std::size_t i = 0; i < producers.size(); ++i) {
    for (const Chunk& c : producers[i].chunks) {
      ledger.record(i, c.round, c.text);
      release = std::max(release, c.t_end);
    }
    if (!producers[i].chunks.empty()) r.arrived.push_back(names[i]);
  }
  r.release_time = release;

  ledger.seal_render();
  std::vector<Message> messages = consumer.render(ledger);
  const int n = std::min(static_cast<int>(consumer.agent.script.size()),
                         consumer.agent.sampling.max_total_tokens);
  r.prompt_tokens = message_tokens(messages);
  r.charged_prompt_tokens = r.prompt_tokens;
  r.prompt = messages;
  const std::vector<double> times =
      sim_event_times(consumer.agent.latency, consumer.sim_identity, 0,
                      release, r.charged_prompt_tokens, n);
  r.s_start = times.front();
  r.s_end = times.back();
  r.tokens = n;
  out.prompt_tokens_consumed += r.charged_prompt_tokens;
  out.final_text = join_tokens(consumer.agent.script, 0,
                               static_cast<std::size_t>(n));
  out.aggregator_token_count = n;
  out.ttft_seconds = r.s_start;
  out.total_seconds = r.s_end;
  out.rounds.push_back(std::move(r));
}

SimAgent make_sim_agent(const AgentSpec& spec) {
  if (spec.backend.kind != BackendKind::simulated)
    throw std::invalid_argument("oracle_simulate requires simulated backends"
                                " (agent: " + spec.name + ")");
  SimAgent agent;
  agent.name = spec.name;
  agent.script = load_script(spec.backend, spec.name);
  agent.latency = spec.backend.latency;
  agent.sampling = spec.sampling;
  return agent;
}

}  // namespace

// ============================================================
// Entry point
// ============================================================

OracleRun oracle_simulate(const PipelineConfig& config, RunMode mode) {
  const std::vector<Violation> violations = validate_config(config);
  if (!violations.empty())
    throw std::invalid_argument("oracle_simulate: invalid config (" +
                                std::string(to_string(violations[0].code)) +
                                ")");

  std::vector<std::string> names;
  std::vector<SimAgent> agents;
  for (const AgentSpec& p : config.proposers) {
    names.push_back(p.name);
    agents.push_back(make_sim_agent(p));
  }

  std::vector<ProducerSim> producers;
  for (std::size_t i = 0; i < agents.size(); ++i)
    producers.push_back(
        mode == RunMode::staircase
            ? simulate_producer_chain(agents[i], static_cast<int>(i),
                                      config.query, config.schedule)
            : simulate_producer_full(agents[i], static_cast<int>(i),
                                     config.query));

  OracleRun out;
  for (const ProducerSim& p : producers) {
    out.prompt_tokens_consumed += p.charged_prompt_tokens;
    out.chunks.insert(out.chunks.end(), p.chunks.begin(), p.chunks.end());
  }
  sort_chunks(out.chunks);

  ConsumerSim consumer;
  if (config.topology == Topology::mad) {
    std::size_t final_index = 0;
    for (std::size_t i = 0; i < config.proposers.size(); ++i)
      if (config.proposers[i].name == config.mad_final_agent) final_index = i;
    consumer.agent = agents[final_index];
    consumer.sim_identity = consumer.agent.name + "#debate";
    consumer.self_index = static_cast<int>(final_index);
    consumer.render = [&config, final_index](const ChunkLedger& l) {
      return render_mad(l, final_index, config.query);
    };
  } else {
    consumer.agent = make_sim_agent(config.aggregator);
    consumer.sim_identity = consumer.agent.name;
    consumer.prefix_cache = config.topology == Topology::moa_prefix_cache;
    if (consumer.prefix_cache)
      consumer.render = [&config](const ChunkLedger& l) {
        return render_moa_prefix_cache(l, config.query);
      };
    else
      consumer.render = [&config](const ChunkLedger& l) {
        return render_moa(l, config.query);
      };
  }

  if (mode == RunMode::staircase)
    simulate_consumer(producers, names, config.schedule,
                      config.redundancy_scope, consumer, out);
  else
    simulate_consumer_once(producers, names, consumer, out);
  return out;
}

// ============================================================
// Comparison
// ============================================================

namespace {

class Comparator {
 public:
  void timing(const std::string& what, double engine, double reference) {
    const double dev =
        std::fabs(engine - reference) / std::max(std::fabs(reference), 1e-6);
    if (dev > worst_) {
      worst_ = dev;
      worst_what_ = what;
    }
  }
  void require(bool ok, const std::string& what) {
    if (!ok) mismatches_.push_back(what);
  }

  double worst() const { return worst_; }
  const std::string& worst_what() const { return worst_what_; }
  std::vector<std::string> take_mismatches() { return std::move(mismatches_); }

 private:
  double worst_ = 0.0;
  std::string worst_what_;
  std::vector<std::string> mismatches_;
};

std::string round_tag(int round) { return "round " + std::to_string(round); }

}  // namespace

CompareReport compare_run(const OracleRun& reference,
                          const RunTranscript& transcript) {
  Comparator cmp;

  // Producer chunks: same set, same bytes, matching boundary times.
  std::vector<Chunk> expect = reference.chunks;
  std::vector<Chunk> got = transcript.chunks;
  auto by_identity = [](const Chunk& a, const Chunk& b) {
    return std::tie(a.agent_index, a.round) < std::tie(b.agent_index, b.round);
  };
  std::sort(expect.begin(), expect.end(), by_identity);
  std::sort(got.begin(), got.end(), by_identity);
  cmp.require(expect.size() == got.size(),
              "chunk count: engine " + std::to_string(got.size()) +
                  ", reference " + std::to_string(expect.size()));
  for (std::size_t i = 0; i < expect.size() && i < got.size(); ++i) {
    const Chunk& e = expect[i];
    const Chunk& g = got[i];
    const std::string tag =
        e.agent + " " + round_tag(e.round) + " chunk ";
    cmp.require(e.agent_index == g.agent_index && e.round == g.round,
                tag + "identity");
    cmp.require(e.text == g.text, tag + "text");
    cmp.require(e.token_count == g.token_count, tag + "token count");
    cmp.require(e.is_final == g.is_final, tag + "final flag");
    cmp.timing(tag + "t_start", g.t_start, e.t_start);
    cmp.timing(tag + "t_end", g.t_end, e.t_end);
  }

  // Consumer prompts, byte for byte.
  const std::size_t prompt_rounds =
      std::count_if(reference.rounds.begin(), reference.rounds.end(),
                    [](const OracleRound& r) { return !r.prompt.empty(); });
  cmp.require(transcript.aggregator_prompts.size() == prompt_rounds,
              "prompt count: engine " +
                  std::to_string(transcript.aggregator_prompts.size()) +
                  ", reference " + std::to_string(prompt_rounds));
  std::size_t pi = 0;
  for (const OracleRound& r : reference.rounds) {
    if (r.prompt.empty()) continue;
    if (pi >= transcript.aggregator_prompts.size()) break;
    const RoundPrompt& got_prompt = transcript.aggregator_prompts[pi++];
    const std::string tag = round_tag(r.round) + " prompt ";
    cmp.require(got_prompt.round == r.round, tag + "round number");
    cmp.require(got_prompt.messages.size() == r.prompt.size(),
                tag + "message count");
    for (std::size_t m = 0;
         m < r.prompt.size() && m < got_prompt.messages.size(); ++m) {
      cmp.require(got_prompt.messages[m].role == r.prompt[m].role,
                  tag + "message " + std::to_string(m) + " role");
      cmp.require(got_prompt.messages[m].content == r.prompt[m].content,
                  tag + "message " + std::to_string(m) + " content");
    }
  }

  // Barrier releases and arrivals from the event stream.
  std::map<int, const EngineEvent*> barriers;
  std::map<int, std::pair<double, double>> extents;
  std::map<int, int> round_tokens;
  std::optional<long long> reported_prompt_tokens;
  for (const EngineEvent& e : transcript.events) {
    switch (e.kind) {
      case EventKind::barrier_released:
        barriers[e.round] = &e;
        break;
      case EventKind::aggregator_delta: {
        auto [it, fresh] =
            extents.try_emplace(e.round, e.timestamp, e.timestamp);
        if (!fresh) {
          it->second.first = std::min(it->second.first, e.timestamp);
          it->second.second = std::max(it->second.second, e.timestamp);
        }
        ++round_tokens[e.round];
        break;
      }
      case EventKind::run_complete:
        reported_prompt_tokens = e.prompt_tokens;
        break;
      default:
        break;
    }
  }
  for (const OracleRound& r : reference.rounds) {
    const std::string tag = round_tag(r.round) + " ";
    if (r.barrier_event) {
      auto it = barriers.find(r.round);
      cmp.require(it != barriers.end(), tag + "barrier event");
      if (it != barriers.end()) {
        cmp.timing(tag + "release", it->second->timestamp, r.release_time);
        cmp.require(it->second->arrived == r.arrived, tag + "arrived set");
      }
    }
    if (r.tokens > 0) {
      auto it = extents.find(r.round);
      cmp.require(it != extents.end(), tag + "deltas");
      if (it != extents.end()) {
        cmp.timing(tag + "s_start", it->second.first, r.s_start);
        cmp.timing(tag + "s_end", it->second.second, r.s_end);
      }
      auto tk = round_tokens.find(r.round);
      cmp.require(tk != round_tokens.end() && tk->second == r.tokens,
                  tag + "token count");
    }
  }
  cmp.require(static_cast<std::size_t>(std::count_if(
                  reference.rounds.begin(), reference.rounds.end(),
                  [](const OracleRound& r) { return r.barrier_event; })) ==
                  barriers.size(),
              "barrier event count");

  // Whole-run outputs.
  cmp.require(transcript.final_text == reference.final_text, "final text");
  if (transcript.metrics) {
    cmp.timing("ttft", transcript.metrics->ttft_seconds,
               reference.ttft_seconds);
    cmp.timing("total", transcript.metrics->total_wall_seconds,
               reference.total_seconds);
    cmp.require(transcript.metrics->aggregator_token_count ==
                    reference.aggregator_token_count,
                "aggregator token count");
  } else {
    cmp.require(reference.aggregator_token_count == 0, "metrics missing");
  }
  cmp.require(reported_prompt_tokens.has_value(), "run_complete event");
  if (reported_prompt_tokens)
    cmp.require(*reported_prompt_tokens == reference.prompt_tokens_consumed,
                "prompt tokens: engine " +
                    std::to_string(*reported_prompt_tokens) + ", reference " +
                    std::to_string(reference.prompt_tokens_consumed));

  CompareReport report;
  report.max_relative_deviation = cmp.worst();
  report.worst_timing = cmp.worst_what();
  report.mismatches = cmp.take_mismatches();
  return report;
}

}  // namespace staircase
