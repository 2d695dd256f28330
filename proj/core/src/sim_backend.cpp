#include "staircase/sim_backend.hpp"

#include <algorithm>
#include <stdexcept>

namespace staircase {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

double jitter_unit(const JitterSpec& jitter, const std::string& agent,
                   int request_index, int event_index) {
  std::uint64_t key = jitter.seed ^ fnv1a(agent);
  key = splitmix64(key + static_cast<std::uint64_t>(request_index));
  key = splitmix64(key + static_cast<std::uint64_t>(event_index));
  return static_cast<double>(key >> 11) * 0x1.0p-53;
}

std::vector<double> sim_event_times(const LatencyModel& latency,
                                    const std::string& agent,
                                    int request_index, double anchor,
                                    int charged_prompt_tokens, int n_events) {
  const double frac = latency.jitter.max_fraction;
  auto factor = [&](int event_index) {
    if (frac <= 0.0) return 1.0;
    return 1.0 + frac * jitter_unit(latency.jitter, agent, request_index,
                                    event_index);
  };
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(std::max(n_events, 0)));
  double t = anchor +
             factor(0) * (latency.fixed_overhead_seconds +
                          latency.prefill_seconds_per_prompt_token *
                              charged_prompt_tokens);
  for (int k = 1; k <= n_events; ++k) {
    t += factor(k) * latency.decode_seconds_per_token;
    times.push_back(t);
  }
  return times;
}

int prompt_token_count(const std::vector<Message>& messages,
                       const std::string& continuation_text) {
  int n = 0;
  for (const Message& m : messages) n += count_tokens(m.content);
  return n + count_tokens(continuation_text);
}

SimulatedBackend::SimulatedBackend(std::string agent_name,
                                   std::vector<std::string> script,
                                   LatencyModel latency,
                                   std::shared_ptr<const RunClock> clock)
    : agent_(std::move(agent_name)),
      script_(std::move(script)),
      latency_(latency),
      clock_(std::move(clock)) {
  prefix_lengths_.reserve(script_.size() + 1);
  std::size_t len = 0;
  prefix_lengths_.push_back(0);
  for (std::size_t p = 0; p < script_.size(); ++p) {
    len += token_delta(script_[p], p).size();
    prefix_lengths_.push_back(len);
  }
}

StreamOutcome SimulatedBackend::stream_generate(
    const GenerationRequest& request, const TokenSink& sink) {
  if (request.max_new_tokens < 1)
    throw std::invalid_argument("stream_generate: max_new_tokens must be >= 1");
  const int req_index = request_index_++;

  StreamOutcome out;

  // The continuation must be exactly the first k tokens this script emits.
  const std::string& cont = request.continuation_text;
  auto it = std::find(prefix_lengths_.begin(), prefix_lengths_.end(),
                      cont.size());
  std::size_t k0 = static_cast<std::size_t>(-1);
  if (it != prefix_lengths_.end()) {
    std::size_t k = static_cast<std::size_t>(it - prefix_lengths_.begin());
    if (join_tokens(script_, 0, k) == cont) k0 = k;
  }
  if (k0 == static_cast<std::size_t>(-1)) {
    out.error = StreamErrorKind::script_mismatch;
    out.message = "continuation_text is not a prefix of the script";
    return out;
  }
  if (k0 == script_.size()) {
    out.error = StreamErrorKind::script_mismatch;
    out.message = "script already exhausted by continuation_text";
    return out;
  }

  const double anchor = std::max(request.earliest_start, 0.0);
  out.prompt_tokens =
      prompt_token_count(request.messages, request.continuation_text);
  int cached = std::min(count_tokens(request.cached_prefix_text),
                        out.prompt_tokens);
  out.charged_prompt_tokens = out.prompt_tokens - cached;

  const int n = std::min<std::size_t>(request.max_new_tokens,
                                      script_.size() - k0);
  const std::vector<double> times = sim_event_times(
      latency_, agent_, req_index, anchor, out.charged_prompt_tokens, n);

  out.start_time = anchor;
  const bool paced = clock_->time_scale > 0.0;
  for (int k = 0; k < n; ++k) {
    if (paced) {
      clock_->pace_until(times[k]);
      out.max_lag_seconds =
          std::max(out.max_lag_seconds, clock_->model_now() - times[k]);
    }
    TokenEvent ev;
    ev.text_delta = token_delta(script_[k0 + k], k0 + k);
    ev.timestamp = times[k];
    ev.is_end_of_response = (k0 + static_cast<std::size_t>(k) + 1 ==
                             script_.size());
    out.text += ev.text_delta;
    ++out.tokens_emitted;
    out.end_time = ev.timestamp;
    out.end_of_response = ev.is_end_of_response;
    if (!sink(ev)) {
      out.error = StreamErrorKind::canceled;
      out.message = "canceled by sink";
      return out;
    }
  }
  out.ok = true;
  return out;
}

}  // namespace staircase
