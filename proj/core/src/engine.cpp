#include "staircase/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <tuple>
#include <vector>

#include "staircase/backend.hpp"
#include "staircase/templates.hpp"

namespace staircase {

const char* to_string(RunMode mode) {
  switch (mode) {
    case RunMode::staircase: return "staircase";
    case RunMode::normal: return "normal";
  }
  return "unknown";
}

namespace {

std::chrono::steady_clock::time_point after(double seconds) {
  return std::chrono::steady_clock::now() +
         std::chrono::duration_cast<std::chrono::steady_clock::duration>(
             std::chrono::duration<double>(std::max(seconds, 0.0)));
}

// ============================================================
// Event collection
// ============================================================

// Serializes event emission from all run threads, stamps wall time, and
// forwards each event to the caller's observer in emission order.
class EventCollector {
 public:
  EventCollector(std::shared_ptr<const RunClock> clock,
                 std::function<void(const EngineEvent&)> sink)
      : clock_(std::move(clock)), sink_(std::move(sink)) {}

  void push(EngineEvent e) {
    std::lock_guard<std::mutex> lock(mu_);
    e.wall_timestamp = clock_->wall_now();
    last_timestamp_ = std::max(last_timestamp_, e.timestamp);
    events_.push_back(e);
    if (sink_) sink_(events_.back());
  }

  double last_timestamp() const {
    std::lock_guard<std::mutex> lock(mu_);
    return last_timestamp_;
  }

  std::vector<EngineEvent> take() {
    std::lock_guard<std::mutex> lock(mu_);
    return std::move(events_);
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const RunClock> clock_;
  std::function<void(const EngineEvent&)> sink_;
  std::vector<EngineEvent> events_;
  double last_timestamp_ = 0.0;
};

// ============================================================
// Chunk hub: the barrier between producers and consumers
// ============================================================

class ChunkHub {
 public:
  ChunkHub(std::size_t n_producers, const ChunkSchedule& schedule,
           RedundancyScope scope)
      : producers_(n_producers), schedule_(schedule), scope_(scope) {}

  void deliver(const Chunk& chunk) {
    std::lock_guard<std::mutex> lock(mu_);
    producers_.at(static_cast<std::size_t>(chunk.agent_index))
        .chunks.push_back(chunk);
    cv_.notify_all();
  }

  // Marks a producer as done. `final_round` is its last delivered round,
  // 0 when it produced nothing. Only the first call takes effect.
  void finish(int producer, int final_round) {
    std::lock_guard<std::mutex> lock(mu_);
    Producer& p = producers_.at(static_cast<std::size_t>(producer));
    if (!p.final_round) p.final_round = final_round;
    cv_.notify_all();
  }

  // Wakes every blocked consumer; subsequent waits return immediately.
  void shutdown() {
    std::lock_guard<std::mutex> lock(mu_);
    shutdown_ = true;
    cv_.notify_all();
  }

  struct Barrier {
    bool canceled = false;
    bool no_more_rounds = false;
    bool timed_out = false;
    bool failed = false;  // timed out with nothing to hand over
    double release_time = 0.0;
    // Per producer, the prefix of its chunks with t_end <= release_time.
    std::vector<std::vector<Chunk>> per_producer;
    // Producers whose chunk of the awaited round is in the snapshot.
    std::vector<int> arrived;
    // True when every producer's last chunk made it into the snapshot, so
    // the consumer is looking at complete responses.
    bool includes_all_finals = false;
  };

  // Blocks until the inputs for `round` are released. `ready_time` is the
  // model time the consumer finished its previous slice; the release never
  // precedes it. In paced runs the barrier opens once a quorum of the
  // round's chunks has arrived (after a short grace so near-simultaneous
  // chunks land together); unpaced runs wait for every active producer and
  // then apply the quorum cutoff exactly, since wall-clock arrival order
  // carries no information about the model timeline. `exclude` removes one
  // producer from the quorum counting (a debater's peers form the quorum),
  // but the excluded producer's own slice of the round is still waited for:
  // its words belong in the debate prompt and arrive on the same cadence as
  // everyone else's.
  Barrier await_round(int round, double ready_time, bool paced,
                      double grace_seconds, double timeout_seconds,
                      int exclude = -1) {
    const auto deadline = after(timeout_seconds);
    std::unique_lock<std::mutex> lock(mu_);
    std::optional<std::chrono::steady_clock::time_point> grace_deadline;
    double release = 0.0;
    bool timed_out = false;

    for (;;) {
      if (shutdown_) {
        Barrier b;
        b.canceled = true;
        return b;
      }
      const std::vector<int> active = active_locked(round, exclude);
      if (active.empty()) {
        Barrier b;
        b.no_more_rounds = true;
        return b;
      }
      const int q = quorum(static_cast<int>(active.size()), schedule_,
                           scope_, round);
      std::vector<double> ends;
      for (int i : active) {
        const Chunk* c = round_chunk_locked(i, round);
        if (c) ends.push_back(c->t_end);
      }
      std::sort(ends.begin(), ends.end());
      double self_end = -1.0;
      bool self_pending = false;
      if (exclude >= 0) {
        const Producer& self =
            producers_[static_cast<std::size_t>(exclude)];
        if (!self.final_round || *self.final_round >= round) {
          const Chunk* c = round_chunk_locked(exclude, round);
          if (c)
            self_end = c->t_end;
          else
            self_pending = true;
        }
      }
      const bool all_arrived =
          ends.size() == active.size() && !self_pending;
      const bool quorum_met =
          static_cast<int>(ends.size()) >= q && !self_pending;
      const auto now = std::chrono::steady_clock::now();

      if (all_arrived) {
        release = std::max(
            {ready_time, ends[static_cast<std::size_t>(q - 1)], self_end});
        break;
      }
      if (paced && quorum_met) {
        if (!grace_deadline) grace_deadline = after(grace_seconds);
        if (now >= *grace_deadline) {
          release = std::max(
              {ready_time, ends[static_cast<std::size_t>(q - 1)], self_end});
          break;
        }
      }
      if (now >= deadline) {
        if (ends.empty()) {
          Barrier b;
          b.timed_out = true;
          b.failed = true;
          return b;
        }
        timed_out = true;
        const std::size_t qq =
            std::min(static_cast<std::size_t>(q), ends.size());
        release = std::max({ready_time, ends[qq - 1], self_end});
        break;
      }
      auto until = deadline;
      if (grace_deadline && *grace_deadline < until) until = *grace_deadline;
      cv_.wait_until(lock, until);
    }

    // Unpaced runs decide membership purely by end times, so let every
    // producer push the chunks that finish before the release point; their
    // deadlines are exact even though their wall arrival order is not.
    if (!paced && !timed_out) {
      cv_.wait_until(lock, deadline, [&] {
        if (shutdown_) return true;
        for (const Producer& p : producers_) {
          if (p.final_round) continue;
          if (p.chunks.empty() || p.chunks.back().t_end <= release)
            return false;
        }
        return true;
      });
    }
    return snapshot_locked(round, release, timed_out);
  }

  std::vector<std::vector<Chunk>> all_chunks() const {
    std::lock_guard<std::mutex> lock(mu_);
    std::vector<std::vector<Chunk>> out;
    out.reserve(producers_.size());
    for (const Producer& p : producers_) out.push_back(p.chunks);
    return out;
  }

  // Waits until every producer finished. Producer streams terminate on
  // their own (scripts are finite, live requests carry timeouts), and a
  // shutdown wakes this immediately.
  void wait_all_finished() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] {
      if (shutdown_) return true;
      for (const Producer& p : producers_)
        if (!p.final_round) return false;
      return true;
    });
  }

 private:
  struct Producer {
    std::vector<Chunk> chunks;  // rounds 1..k in order, t_end increasing
    std::optional<int> final_round;
  };

  std::vector<int> active_locked(int round, int exclude) const {
    std::vector<int> active;
    for (std::size_t i = 0; i < producers_.size(); ++i) {
      if (static_cast<int>(i) == exclude) continue;
      const Producer& p = producers_[i];
      if (!p.final_round || *p.final_round >= round)
        active.push_back(static_cast<int>(i));
    }
    return active;
  }

  const Chunk* round_chunk_locked(int producer, int round) const {
    const Producer& p = producers_[static_cast<std::size_t>(producer)];
    if (static_cast<int>(p.chunks.size()) >= round)
      return &p.chunks[static_cast<std::size_t>(round - 1)];
    return nullptr;
  }

  Barrier snapshot_locked(int round, double release, bool timed_out) const {
    Barrier b;
    b.timed_out = timed_out;
    b.release_time = release;
    b.per_producer.resize(producers_.size());
    for (std::size_t i = 0; i < producers_.size(); ++i) {
      for (const Chunk& c : producers_[i].chunks) {
        if (c.t_end > release) break;
        b.per_producer[i].push_back(c);
      }
    }
    for (std::size_t i = 0; i < producers_.size(); ++i) {
      for (const Chunk& c : b.per_producer[i]) {
        if (c.round == round) {
          b.arrived.push_back(static_cast<int>(i));
          break;
        }
      }
    }
    b.includes_all_finals = true;
    for (const Producer& p : producers_) {
      if (!p.final_round) {
        b.includes_all_finals = false;
        break;
      }
      if (*p.final_round == 0) continue;
      if (static_cast<int>(p.chunks.size()) < *p.final_round ||
          p.chunks.back().t_end > release) {
        b.includes_all_finals = false;
        break;
      }
    }
    return b;
  }

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<Producer> producers_;
  ChunkSchedule schedule_;
  RedundancyScope scope_;
  bool shutdown_ = false;
};

// ============================================================
// Shared run state
// ============================================================

struct RunContext {
  const PipelineConfig* config = nullptr;
  std::shared_ptr<const RunClock> clock;
  const RunOptions* options = nullptr;
  EventCollector* events = nullptr;
  ChunkHub* hub = nullptr;
  std::atomic<bool>* cancel = nullptr;
  std::vector<std::string> producer_names;
};

struct ProducerStats {
  long long charged_prompt_tokens = 0;
  double max_lag = 0.0;
};

// Runs one producer's chunk chain: each round requests the next slice of
// its own response (continuation semantics), chained so a slice may not
// start before the previous one ended.
ProducerStats run_producer_chain(RunContext& ctx, int index,
                                 const AgentSpec& spec, Backend& backend) {
  ProducerStats stats;
  std::string accumulated;
  int generated = 0;
  int completed = 0;
  double prev_end = 0.0;

  for (;;) {
    if (ctx.cancel->load()) break;
    const int round = completed + 1;
    const int budget =
        std::min(chunk_size(ctx.config->schedule, AgentRole::proposer, round),
                 spec.sampling.max_total_tokens - generated);
    if (budget < 1) break;

    GenerationRequest req;
    req.messages = {{Role::user, ctx.config->query}};
    req.continuation_text = accumulated;
    req.max_new_tokens = budget;
    req.temperature = spec.sampling.temperature;
    req.top_p = spec.sampling.top_p;
    req.earliest_start = prev_end;

    StreamOutcome out = backend.stream_generate(
        req, [&](const TokenEvent&) { return !ctx.cancel->load(); });
    stats.charged_prompt_tokens += out.charged_prompt_tokens;
    stats.max_lag = std::max(stats.max_lag, out.max_lag_seconds);
    if (out.error == StreamErrorKind::canceled) break;

    const bool budget_done =
        generated + out.tokens_emitted >= spec.sampling.max_total_tokens;
    const bool delivered = out.tokens_emitted > 0;
    if (delivered) {
      Chunk c;
      c.agent = spec.name;
      c.agent_index = index;
      c.round = round;
      c.text = out.text;
      c.token_count = out.tokens_emitted;
      c.t_start = out.start_time;
      c.t_end = out.end_time;
      c.is_final = out.end_of_response || budget_done || !out.ok;
      accumulated += out.text;
      generated += out.tokens_emitted;
      prev_end = out.end_time;
      completed = round;
      ctx.hub->deliver(c);

      EngineEvent e;
      e.kind = EventKind::proposer_chunk_done;
      e.timestamp = c.t_end;
      e.agent = c.agent;
      e.round = c.round;
      e.token_count = c.token_count;
      e.t_start = c.t_start;
      e.is_final = c.is_final;
      ctx.events->push(e);
    }
    if (!out.ok) {
      EngineEvent e;
      e.kind = EventKind::agent_error;
      e.timestamp = out.end_time > 0.0 ? out.end_time : ctx.clock->model_now();
      e.agent = spec.name;
      e.round = round;
      e.error_kind = to_string(out.error);
      e.error_message = out.message;
      ctx.events->push(e);
      break;
    }
    if (out.end_of_response || budget_done || !delivered) break;
  }
  ctx.hub->finish(index, completed);
  return stats;
}

// ============================================================
// Consumer loop
// ============================================================

struct ConsumerPlan {
  const AgentSpec* spec = nullptr;
  Backend* backend = nullptr;
  // Producer index to exclude from the quorum, -1 for none.
  int self_index = -1;
  // Whether this consumer's output is the run's answer (deltas and barrier
  // events are only emitted for the user-facing consumer).
  bool user_facing = true;
  // Charge prefill only for prompt bytes beyond the previous round's system
  // message (the grow-by-append template makes that prefix cache-resident).
  bool prefix_cache = false;
  std::function<std::vector<Message>(const ChunkLedger&)> render;
};

struct ConsumerResult {
  bool ok = false;
  bool canceled = false;
  std::string error;
  std::string text;
  int tokens = 0;
  long long charged_prompt_tokens = 0;
  double max_lag = 0.0;
  double end_time = 0.0;
  std::vector<RoundPrompt> prompts;
};

ConsumerResult run_consumer(RunContext& ctx, const ConsumerPlan& plan) {
  ConsumerResult res;
  ChunkLedger ledger(ctx.producer_names);
  std::vector<std::size_t> recorded(ctx.producer_names.size(), 0);
  const bool paced = ctx.options->time_scale > 0.0;
  std::string prev_system;
  double ready = 0.0;
  int round = 0;

  auto record_new = [&](const std::vector<std::vector<Chunk>>& per_producer) {
    std::vector<const Chunk*> fresh;
    for (std::size_t i = 0; i < per_producer.size(); ++i)
      for (std::size_t k = recorded[i]; k < per_producer[i].size(); ++k)
        fresh.push_back(&per_producer[i][k]);
    std::sort(fresh.begin(), fresh.end(),
              [](const Chunk* a, const Chunk* b) {
                return std::tie(a->round, a->agent_index) <
                       std::tie(b->round, b->agent_index);
              });
    for (const Chunk* c : fresh)
      ledger.record(static_cast<std::size_t>(c->agent_index), c->round,
                    c->text);
    for (std::size_t i = 0; i < per_producer.size(); ++i)
      recorded[i] = std::max(recorded[i], per_producer[i].size());
  };

  for (;;) {
    if (ctx.cancel->load()) {
      res.canceled = true;
      return res;
    }
    ++round;
    ChunkHub::Barrier barrier = ctx.hub->await_round(
        round, ready, paced, ctx.options->barrier_grace_seconds,
        ctx.config->per_round_timeout, plan.self_index);
    if (barrier.canceled) {
      res.canceled = true;
      return res;
    }
    if (barrier.failed) {
      res.error =
          "round " + std::to_string(round) + " timed out with no chunks";
      return res;
    }

    bool unbounded = false;
    double release = ready;
    if (barrier.no_more_rounds) {
      // The producers this consumer waits on are done. Absorb whatever is
      // left (a debater's own late chunks included) and close out without a
      // token bound.
      if (plan.self_index >= 0) ctx.hub->wait_all_finished();
      record_new(ctx.hub->all_chunks());
      unbounded = true;
    } else {
      record_new(barrier.per_producer);
      unbounded = barrier.includes_all_finals;
      release = barrier.release_time;
      if (plan.user_facing) {
        EngineEvent e;
        e.kind = EventKind::barrier_released;
        e.timestamp = release;
        e.round = round;
        for (int i : barrier.arrived)
          e.arrived.push_back(ctx.producer_names[static_cast<std::size_t>(i)]);
        ctx.events->push(e);
      }
    }

    const int remaining = plan.spec->sampling.max_total_tokens - res.tokens;
    if (remaining < 1) break;

    ledger.seal_render();
    std::vector<Message> messages = plan.render(ledger);

    GenerationRequest req;
    req.messages = messages;
    req.continuation_text = res.text;
    req.max_new_tokens =
        unbounded ? remaining
                  : std::min(chunk_size(ctx.config->schedule,
                                        AgentRole::aggregator, round),
                             remaining);
    req.temperature = plan.spec->sampling.temperature;
    req.top_p = plan.spec->sampling.top_p;
    req.earliest_start = release;
    if (plan.prefix_cache) req.cached_prefix_text = prev_system;
    if (!messages.empty() && messages.front().role == Role::system)
      prev_system = messages.front().content;

    RoundPrompt stored;
    stored.round = round;
    stored.messages = messages;
    if (!res.text.empty())
      stored.messages.push_back({Role::assistant, res.text});
    res.prompts.push_back(std::move(stored));

    const int this_round = round;
    StreamOutcome out = plan.backend->stream_generate(
        req, [&, this_round](const TokenEvent& ev) {
          if (ctx.cancel->load()) return false;
          if (plan.user_facing) {
            EngineEvent e;
            e.kind = EventKind::aggregator_delta;
            e.timestamp = ev.timestamp;
            e.agent = plan.spec->name;
            e.round = this_round;
            e.text = ev.text_delta;
            ctx.events->push(e);
          }
          return true;
        });
    res.charged_prompt_tokens += out.charged_prompt_tokens;
    res.max_lag = std::max(res.max_lag, out.max_lag_seconds);
    res.text += out.text;
    res.tokens += out.tokens_emitted;
    if (out.end_time > 0.0) res.end_time = std::max(res.end_time, out.end_time);
    if (out.error == StreamErrorKind::canceled) {
      res.canceled = true;
      return res;
    }
    if (!out.ok) {
      EngineEvent e;
      e.kind = EventKind::agent_error;
      e.timestamp = out.end_time > 0.0 ? out.end_time : ctx.clock->model_now();
      e.agent = plan.spec->name;
      e.round = round;
      e.error_kind = to_string(out.error);
      e.error_message = out.message;
      ctx.events->push(e);
      res.error = plan.spec->name + ": " + out.message;
      return res;
    }
    if (out.end_of_response || unbounded) break;
    ready = out.end_time;
  }
  res.ok = true;
  return res;
}

// ============================================================
// Result assembly
// ============================================================

RunResult assemble_result(const PipelineConfig& config, RunMode mode,
                          EventCollector& events, std::vector<Chunk> chunks,
                          const ConsumerResult& user, long long charged_total,
                          double max_lag) {
  if (user.ok) {
    EngineEvent e;
    e.kind = EventKind::run_complete;
    e.timestamp = std::max(events.last_timestamp(), user.end_time);
    e.prompt_tokens = charged_total;
    e.max_lag_seconds = max_lag;
    events.push(e);
  }
  RunResult r;
  r.ok = user.ok;
  r.error = user.error;
  if (!user.ok && r.error.empty())
    r.error = user.canceled ? "run canceled" : "run failed";
  RunTranscript& t = r.transcript;
  t.config = config;
  t.mode = to_string(mode);
  t.chunks = std::move(chunks);
  sort_chunks(t.chunks);
  t.aggregator_prompts = user.prompts;
  t.final_text = user.text;
  t.events = events.take();
  std::stable_sort(t.events.begin(), t.events.end(),
                   [](const EngineEvent& a, const EngineEvent& b) {
                     return a.timestamp < b.timestamp;
                   });
  t.metrics = measure(t.events);
  return r;
}

std::vector<Chunk> flatten(const std::vector<std::vector<Chunk>>& grouped) {
  std::vector<Chunk> out;
  for (const auto& g : grouped) out.insert(out.end(), g.begin(), g.end());
  return out;
}

std::vector<std::string> proposer_names(const PipelineConfig& config) {
  std::vector<std::string> names;
  names.reserve(config.proposers.size());
  for (const AgentSpec& p : config.proposers) names.push_back(p.name);
  return names;
}

// Generates one producer's complete response in a single request and turns
// it into a round-1 chunk (the sequential baseline's producer step).
ProducerStats run_producer_full(RunContext& ctx, int index,
                                const AgentSpec& spec, Backend& backend) {
  ProducerStats stats;
  GenerationRequest req;
  req.messages = {{Role::user, ctx.config->query}};
  req.max_new_tokens = spec.sampling.max_total_tokens;
  req.temperature = spec.sampling.temperature;
  req.top_p = spec.sampling.top_p;

  StreamOutcome out = backend.stream_generate(
      req, [&](const TokenEvent&) { return !ctx.cancel->load(); });
  stats.charged_prompt_tokens += out.charged_prompt_tokens;
  stats.max_lag = out.max_lag_seconds;
  if (out.error == StreamErrorKind::canceled) {
    ctx.hub->finish(index, 0);
    return stats;
  }
  if (out.tokens_emitted > 0) {
    Chunk c;
    c.agent = spec.name;
    c.agent_index = index;
    c.round = 1;
    c.text = out.text;
    c.token_count = out.tokens_emitted;
    c.t_start = out.start_time;
    c.t_end = out.end_time;
    c.is_final = true;
    ctx.hub->deliver(c);

    EngineEvent e;
    e.kind = EventKind::proposer_chunk_done;
    e.timestamp = c.t_end;
    e.agent = c.agent;
    e.round = 1;
    e.token_count = c.token_count;
    e.t_start = c.t_start;
    e.is_final = true;
    ctx.events->push(e);
  }
  if (!out.ok) {
    EngineEvent e;
    e.kind = EventKind::agent_error;
    e.timestamp = out.end_time > 0.0 ? out.end_time : ctx.clock->model_now();
    e.agent = spec.name;
    e.round = 1;
    e.error_kind = to_string(out.error);
    e.error_message = out.message;
    ctx.events->push(e);
  }
  ctx.hub->finish(index, out.tokens_emitted > 0 ? 1 : 0);
  return stats;
}

// Single consumer call over complete producer responses: waits for all of
// them, renders once, generates the full answer.
ConsumerResult run_consumer_once(RunContext& ctx, const ConsumerPlan& plan) {
  ConsumerResult res;
  ctx.hub->wait_all_finished();

  const std::vector<std::vector<Chunk>> grouped = ctx.hub->all_chunks();
  ChunkLedger ledger(ctx.producer_names);
  double release = 0.0;
  std::vector<std::string> arrived;
  for (std::size_t i = 0; i < grouped.size(); ++i) {
    for (const Chunk& c : grouped[i]) {
      ledger.record(i, c.round, c.text);
      release = std::max(release, c.t_end);
    }
    if (!grouped[i].empty()) arrived.push_back(ctx.producer_names[i]);
  }
  if (plan.user_facing) {
    EngineEvent e;
    e.kind = EventKind::barrier_released;
    e.timestamp = release;
    e.round = 1;
    e.arrived = arrived;
    ctx.events->push(e);
  }

  ledger.seal_render();
  std::vector<Message> messages = plan.render(ledger);

  GenerationRequest req;
  req.messages = messages;
  req.max_new_tokens = plan.spec->sampling.max_total_tokens;
  req.temperature = plan.spec->sampling.temperature;
  req.top_p = plan.spec->sampling.top_p;
  req.earliest_start = release;

  res.prompts.push_back({1, messages});
  StreamOutcome out = plan.backend->stream_generate(
      req, [&](const TokenEvent& ev) {
        if (ctx.cancel->load()) return false;
        if (plan.user_facing) {
          EngineEvent e;
          e.kind = EventKind::aggregator_delta;
          e.timestamp = ev.timestamp;
          e.agent = plan.spec->name;
          e.round = 1;
          e.text = ev.text_delta;
          ctx.events->push(e);
        }
        return true;
      });
  res.charged_prompt_tokens = out.charged_prompt_tokens;
  res.max_lag = out.max_lag_seconds;
  res.text = out.text;
  res.tokens = out.tokens_emitted;
  res.end_time = out.end_time;
  if (out.error == StreamErrorKind::canceled) {
    res.canceled = true;
    return res;
  }
  if (!out.ok) {
    EngineEvent e;
    e.kind = EventKind::agent_error;
    e.timestamp = out.end_time > 0.0 ? out.end_time : ctx.clock->model_now();
    e.agent = plan.spec->name;
    e.round = 1;
    e.error_kind = to_string(out.error);
    e.error_message = out.message;
    ctx.events->push(e);
    res.error = plan.spec->name + ": " + out.message;
    return res;
  }
  res.ok = true;
  return res;
}

// ============================================================
// Topology drivers
// ============================================================

RunResult run_moa(const PipelineConfig& config, RunMode mode,
                  const RunOptions& options) {
  auto clock = std::make_shared<RunClock>();
  clock->time_scale = options.time_scale;
  EventCollector events(clock, options.on_event);
  ChunkHub hub(config.proposers.size(), config.schedule,
               config.redundancy_scope);
  std::atomic<bool> cancel{false};

  RunContext ctx;
  ctx.config = &config;
  ctx.clock = clock;
  ctx.options = &options;
  ctx.events = &events;
  ctx.hub = &hub;
  ctx.cancel = &cancel;
  ctx.producer_names = proposer_names(config);

  std::vector<std::unique_ptr<Backend>> backends;
  for (const AgentSpec& p : config.proposers)
    backends.push_back(make_backend(p.backend, p.name, clock));
  std::unique_ptr<Backend> agg_backend =
      make_backend(config.aggregator.backend, config.aggregator.name, clock);

  std::vector<ProducerStats> stats(config.proposers.size());
  std::vector<std::thread> threads;
  threads.reserve(config.proposers.size());
  for (std::size_t i = 0; i < config.proposers.size(); ++i)
    threads.emplace_back([&, i] {
      stats[i] = mode == RunMode::staircase
                     ? run_producer_chain(ctx, static_cast<int>(i),
                                          config.proposers[i], *backends[i])
                     : run_producer_full(ctx, static_cast<int>(i),
                                         config.proposers[i], *backends[i]);
    });

  ConsumerPlan plan;
  plan.spec = &config.aggregator;
  plan.backend = agg_backend.get();
  plan.prefix_cache = config.topology == Topology::moa_prefix_cache;
  if (plan.prefix_cache)
    plan.render = [&config](const ChunkLedger& l) {
      return render_moa_prefix_cache(l, config.query);
    };
  else
    plan.render = [&config](const ChunkLedger& l) {
      return render_moa(l, config.query);
    };

  ConsumerResult agg = mode == RunMode::staircase
                           ? run_consumer(ctx, plan)
                           : run_consumer_once(ctx, plan);
  // Producer chains run to completion even when the aggregator finishes
  // first, so the recorded chunks and billed prompt work do not depend on
  // the pacing mode. A failed aggregator aborts them instead.
  if (!agg.ok) cancel.store(true);
  for (std::thread& t : threads) t.join();
  hub.shutdown();

  long long charged = agg.charged_prompt_tokens;
  double lag = agg.max_lag;
  for (const ProducerStats& s : stats) {
    charged += s.charged_prompt_tokens;
    lag = std::max(lag, s.max_lag);
  }
  return assemble_result(config, mode, events, flatten(hub.all_chunks()), agg,
                         charged, lag);
}

RunResult run_mad(const PipelineConfig& config, RunMode mode,
                  const RunOptions& options) {
  auto clock = std::make_shared<RunClock>();
  clock->time_scale = options.time_scale;
  EventCollector events(clock, options.on_event);
  ChunkHub hub(config.proposers.size(), config.schedule,
               config.redundancy_scope);
  std::atomic<bool> cancel{false};

  RunContext ctx;
  ctx.config = &config;
  ctx.clock = clock;
  ctx.options = &options;
  ctx.events = &events;
  ctx.hub = &hub;
  ctx.cancel = &cancel;
  ctx.producer_names = proposer_names(config);

  std::size_t final_index = 0;
  for (std::size_t i = 0; i < config.proposers.size(); ++i)
    if (config.proposers[i].name == config.mad_final_agent) final_index = i;

  // Every agent first proposes; each then debates over what the others
  // produced. The debate re-uses the agent's model through a second backend
  // instance so both of its streams can run concurrently.
  std::vector<std::unique_ptr<Backend>> propose_backends;
  std::vector<std::unique_ptr<Backend>> debate_backends;
  for (const AgentSpec& p : config.proposers) {
    propose_backends.push_back(make_backend(p.backend, p.name, clock));
    debate_backends.push_back(
        make_backend(p.backend, p.name + "#debate", clock));
  }

  std::vector<ProducerStats> stats(config.proposers.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < config.proposers.size(); ++i)
    threads.emplace_back([&, i] {
      stats[i] = mode == RunMode::staircase
                     ? run_producer_chain(ctx, static_cast<int>(i),
                                          config.proposers[i],
                                          *propose_backends[i])
                     : run_producer_full(ctx, static_cast<int>(i),
                                         config.proposers[i],
                                         *propose_backends[i]);
    });

  auto make_plan = [&](std::size_t agent) {
    ConsumerPlan plan;
    plan.spec = &config.proposers[agent];
    plan.backend = debate_backends[agent].get();
    plan.self_index = static_cast<int>(agent);
    plan.user_facing = agent == final_index;
    plan.render = [&config, agent](const ChunkLedger& l) {
      return render_mad(l, agent, config.query);
    };
    return plan;
  };

  // Peer debates run for fidelity of the load they put on the backends; only
  // the final agent's debate is the run's answer. The baseline runs the
  // final agent alone.
  std::vector<std::thread> peer_threads;
  double peer_lag = 0.0;
  std::mutex peer_mu;
  if (mode == RunMode::staircase) {
    for (std::size_t i = 0; i < config.proposers.size(); ++i) {
      if (i == final_index) continue;
      peer_threads.emplace_back([&, i] {
        ConsumerResult r = run_consumer(ctx, make_plan(i));
        std::lock_guard<std::mutex> lock(peer_mu);
        peer_lag = std::max(peer_lag, r.max_lag);
      });
    }
  }

  ConsumerResult final_res = mode == RunMode::staircase
                                 ? run_consumer(ctx, make_plan(final_index))
                                 : run_consumer_once(ctx,
                                                     make_plan(final_index));
  // Proposal chains finish like any other billed work; only the discarded
  // peer debates are cut short once the answer is complete.
  if (!final_res.ok) cancel.store(true);
  for (std::thread& t : threads) t.join();
  cancel.store(true);
  hub.shutdown();
  for (std::thread& t : peer_threads) t.join();

  // Discarded peer work is not billed to the run; the answer's cost is the
  // proposals plus the final agent's debate.
  long long charged = final_res.charged_prompt_tokens;
  double lag = std::max(final_res.max_lag, peer_lag);
  for (const ProducerStats& s : stats) {
    charged += s.charged_prompt_tokens;
    lag = std::max(lag, s.max_lag);
  }
  return assemble_result(config, mode, events, flatten(hub.all_chunks()),
                         final_res, charged, lag);
}

}  // namespace

// ============================================================
// Entry point
// ============================================================

RunResult run_pipeline(const PipelineConfig& config, RunMode mode,
                       const RunOptions& options) {
  const std::vector<Violation> violations = validate_config(config);
  if (!violations.empty()) {
    RunResult r;
    r.error = "invalid config:";
    for (const Violation& v : violations) {
      r.error += ' ';
      r.error += to_string(v.code);
      if (!v.detail.empty()) r.error += " (" + v.detail + ")";
      r.error += ';';
    }
    return r;
  }
  try {
    if (config.topology == Topology::mad) return run_mad(config, mode, options);
    return run_moa(config, mode, options);
  } catch (const std::exception& e) {
    RunResult r;
    r.error = e.what();
    return r;
  }
}

}  // namespace staircase
