#include "staircase/http_backend.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>

#include "staircase/sse.hpp"

namespace staircase {

namespace {

// State of one streaming attempt, filled in by the content receiver.
struct AttemptState {
  SseParser parser;
  std::vector<std::string> payloads;
  bool saw_done = false;
  std::string finish_reason;
  bool malformed = false;
  std::string malformed_what;
  bool canceled = false;
  bool truncated = false;  // client-side max_new_tokens cut
};

}  // namespace

HttpBackend::HttpBackend(std::string agent_name, BackendRef ref,
                         std::shared_ptr<const RunClock> clock)
    : agent_(std::move(agent_name)),
      ref_(std::move(ref)),
      clock_(std::move(clock)) {
  // Split "scheme://host[:port]/prefix" into the client target and the
  // path prefix ("/v1" style) that goes before /chat/completions.
  host_ = ref_.base_url;
  std::size_t scheme = host_.find("://");
  std::size_t slash =
      host_.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (slash != std::string::npos) {
    path_prefix_ = host_.substr(slash);
    host_.resize(slash);
  }
  while (!path_prefix_.empty() && path_prefix_.back() == '/')
    path_prefix_.pop_back();
}

StreamOutcome HttpBackend::stream_generate(const GenerationRequest& request,
                                           const TokenSink& sink) {
  if (!request.continuation_text.empty() && !ref_.supports_assistant_prefill) {
    StreamOutcome out;
    out.error = StreamErrorKind::capability;
    out.message = agent_ + ": backend rejects assistant-prefill continuation";
    return out;
  }
  StreamOutcome out = attempt(request, sink);
  if (!out.ok && out.error == StreamErrorKind::transport &&
      out.tokens_emitted == 0 && ref_.max_retries > 0) {
    out = attempt(request, sink);
  }
  return out;
}

StreamOutcome HttpBackend::attempt(const GenerationRequest& request,
                                   const TokenSink& sink) {
  StreamOutcome out;
  out.start_time = clock_->wall_now();

  nlohmann::json body;
  body["model"] = ref_.model;
  nlohmann::json messages = nlohmann::json::array();
  for (const Message& m : request.messages)
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  if (!request.continuation_text.empty())
    messages.push_back(
        {{"role", "assistant"}, {"content", request.continuation_text}});
  body["messages"] = std::move(messages);
  body["stream"] = true;
  body["max_tokens"] = request.max_new_tokens;
  body["temperature"] = request.temperature;
  body["top_p"] = request.top_p;

  httplib::Client cli(host_);
  cli.set_connection_timeout(std::chrono::duration<double>(
      ref_.timeout_seconds));
  cli.set_read_timeout(std::chrono::duration<double>(ref_.timeout_seconds));

  httplib::Headers headers;
  if (!ref_.api_key_env.empty()) {
    if (const char* key = std::getenv(ref_.api_key_env.c_str()))
      headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  AttemptState state;
  auto handle_payload = [&](const std::string& payload) -> bool {
    if (payload == "[DONE]") {
      state.saw_done = true;
      return false;  // stop reading
    }
    nlohmann::json frame = nlohmann::json::parse(payload, nullptr, false);
    if (frame.is_discarded()) {
      state.malformed = true;
      state.malformed_what = payload.substr(0, 120);
      return false;
    }
    std::string delta;
    if (frame.contains("choices") && !frame["choices"].empty()) {
      const nlohmann::json& choice = frame["choices"][0];
      if (choice.contains("delta") && choice["delta"].contains("content") &&
          choice["delta"]["content"].is_string())
        delta = choice["delta"]["content"].get<std::string>();
      if (choice.contains("finish_reason") &&
          choice["finish_reason"].is_string())
        state.finish_reason = choice["finish_reason"].get<std::string>();
    }
    if (!delta.empty()) {
      TokenEvent ev;
      ev.text_delta = delta;
      ev.timestamp = clock_->wall_now();
      ev.is_end_of_response = false;
      out.text += ev.text_delta;
      ++out.tokens_emitted;
      out.end_time = ev.timestamp;
      if (!sink(ev)) {
        state.canceled = true;
        return false;
      }
      if (out.tokens_emitted >= request.max_new_tokens &&
          state.finish_reason.empty()) {
        state.truncated = true;
        return false;
      }
    }
    return true;
  };

  httplib::Request http_req;
  http_req.method = "POST";
  http_req.path = path_prefix_ + "/chat/completions";
  http_req.headers = headers;
  http_req.body = body.dump();
  http_req.set_header("Content-Type", "application/json");
  http_req.content_receiver = [&](const char* data, std::size_t len,
                                  std::uint64_t /*offset*/,
                                  std::uint64_t /*total*/) {
    state.parser.feed(std::string_view(data, len), state.payloads);
    bool keep_going = true;
    for (const std::string& payload : state.payloads) {
      if (!handle_payload(payload)) {
        keep_going = false;
        break;
      }
    }
    state.payloads.clear();
    return keep_going;
  };

  int status = 0;
  httplib::Result result = cli.send(http_req);
  if (result) status = result->status;

  if (state.canceled) {
    out.error = StreamErrorKind::canceled;
    out.message = "canceled by sink";
    return out;
  }
  if (state.malformed) {
    out.error = StreamErrorKind::malformed_frame;
    out.message = agent_ + ": unparseable stream frame: " + state.malformed_what;
    return out;
  }
  if (status != 0 && status != 200) {
    out.error = StreamErrorKind::transport;
    out.message = agent_ + ": HTTP " + std::to_string(status);
    return out;
  }
  if (state.truncated || state.saw_done || !state.finish_reason.empty()) {
    out.ok = true;
    out.end_of_response = state.finish_reason == "stop";
    if (out.end_time == 0.0) out.end_time = clock_->wall_now();
    return out;
  }
  if (status == 200 || out.tokens_emitted > 0) {
    // The server closed the stream without [DONE] or a finish_reason.
    out.error = StreamErrorKind::premature_close;
    out.message = agent_ + ": stream closed before completion";
    return out;
  }
  const httplib::Error err = result.error();
  if (err == httplib::Error::ConnectionTimeout ||
      (err == httplib::Error::Read &&
       clock_->wall_now() - out.start_time >= ref_.timeout_seconds * 0.9)) {
    out.error = StreamErrorKind::timeout;
    out.message = agent_ + ": timed out after " +
                  std::to_string(ref_.timeout_seconds) + "s";
  } else {
    out.error = StreamErrorKind::transport;
    out.message = agent_ + ": " + httplib::to_string(err);
  }
  return out;
}

}  // namespace staircase
