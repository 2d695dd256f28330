#pragma once

#include <memory>
#include <string>

#include "staircase/backend.hpp"

namespace staircase {

// OpenAI-compatible streaming client: POST {base_url}/chat/completions with
// stream=true, reading "data: {json}" SSE frames until "data: [DONE]".
// The continuation text is sent as a trailing assistant message; backends
// configured without assistant-prefill support fail fast with a capability
// error instead. max_new_tokens is enforced client-side as well (reading
// stops once the count is reached, whatever the server does with the
// max_tokens hint). At most one retry, and only for transport failures that
// happen before the first token.
class HttpBackend : public Backend {
 public:
  HttpBackend(std::string agent_name, BackendRef ref,
              std::shared_ptr<const RunClock> clock);

  StreamOutcome stream_generate(const GenerationRequest& request,
                                const TokenSink& sink) override;
  bool is_simulated() const override { return false; }

 private:
  StreamOutcome attempt(const GenerationRequest& request,
                        const TokenSink& sink);

  std::string agent_;
  BackendRef ref_;
  std::shared_ptr<const RunClock> clock_;
  std::string host_;  // scheme://host[:port]
  std::string path_prefix_;
};

}  // namespace staircase
