#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "staircase/model.hpp"

namespace staircase {

// Clock shared by every backend of one run. Model time is seconds since the
// anchor with t = 0 at the instant the pipeline received the query.
// `time_scale` controls how simulated backends pace their emissions against
// the wall clock: 1.0 replays in real time, 0.0 emits as fast as possible.
// Live backends report wall time and ignore the scale.
struct RunClock {
  std::chrono::steady_clock::time_point anchor =
      std::chrono::steady_clock::now();
  double time_scale = 1.0;

  double wall_now() const;
  // Real seconds elapsed, expressed in model units (wall / time_scale).
  double model_now() const;
  void pace_until(double model_time) const;
};

struct GenerationRequest {
  std::vector<Message> messages;
  // This agent's previously emitted output, continued verbatim (sent as a
  // trailing assistant turn on chat backends).
  std::string continuation_text;
  int max_new_tokens = 0;  // >= 1
  double temperature = 0.7;
  double top_p = 0.9;
  // Model time at which this request may begin. Simulated backends anchor
  // their event deadlines here; live backends ignore it.
  double earliest_start = 0.0;
  // Byte prefix of the serialized prompt assumed cache-resident. Simulated
  // backends charge prefill only for prompt tokens beyond this prefix.
  std::string cached_prefix_text;
};

struct TokenEvent {
  std::string text_delta;
  double timestamp = 0.0;  // seconds on the run timeline
  bool is_end_of_response = false;
};

enum class StreamErrorKind {
  none,
  transport,
  timeout,
  malformed_frame,
  premature_close,
  capability,
  canceled,
  script_mismatch,
};

const char* to_string(StreamErrorKind kind);

struct StreamOutcome {
  bool ok = false;
  StreamErrorKind error = StreamErrorKind::none;
  std::string message;
  // True when the stream ended because the response reached its natural end
  // (as opposed to hitting max_new_tokens).
  bool end_of_response = false;
  int tokens_emitted = 0;
  std::string text;  // concatenation of the emitted deltas
  double start_time = 0.0;
  double end_time = 0.0;
  int prompt_tokens = 0;          // 0 when the backend cannot count them
  int charged_prompt_tokens = 0;  // prompt tokens that paid prefill
  // Paced simulation only: worst observed wall lag behind an emission
  // deadline, in model seconds. Gauges how faithfully the concurrent run
  // tracked the model timeline.
  double max_lag_seconds = 0.0;
};

// Receives each token event as it is emitted; return false to cancel.
using TokenSink = std::function<bool(const TokenEvent&)>;

// One stream_generate call may be active at a time per instance. Distinct
// instances operate fully concurrently.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual StreamOutcome stream_generate(const GenerationRequest& request,
                                        const TokenSink& sink) = 0;
  virtual bool is_simulated() const = 0;
};

// Builds a backend for one agent. Throws std::runtime_error on unusable
// references (missing or empty script, unreadable file).
std::unique_ptr<Backend> make_backend(const BackendRef& ref,
                                      const std::string& agent_name,
                                      std::shared_ptr<const RunClock> clock);

// Tokenized script of a simulated backend reference. Throws
// std::runtime_error when the reference has no script, the file cannot be
// read, or the script holds no tokens.
std::vector<std::string> load_script(const BackendRef& ref,
                                     const std::string& agent_name);

// ==========================================================================
// The shared token model: one token per whitespace-delimited word.
// ==========================================================================

std::vector<std::string> split_tokens(const std::string& text);
int count_tokens(const std::string& text);

// Delta text for the token at global position `position` of a response
// (tokens are rejoined with single spaces; the first carries no leading
// space). Concatenating deltas for positions [0, n) reproduces the full
// response byte-for-byte regardless of chunk boundaries.
std::string token_delta(const std::string& word, std::size_t position);

// join of tokens [from, to) as the response substring they produce
std::string join_tokens(const std::vector<std::string>& words,
                        std::size_t from, std::size_t to);

}  // namespace staircase
