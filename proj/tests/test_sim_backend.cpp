#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "staircase/backend.hpp"
#include "staircase/sim_backend.hpp"
#include "support.hpp"

using namespace staircase;
using test_support::script_words;

namespace {

std::shared_ptr<RunClock> fast_clock() {
  auto clock = std::make_shared<RunClock>();
  clock->time_scale = 0.0;
  return clock;
}

struct Collected {
  std::vector<TokenEvent> events;
  TokenSink sink() {
    return [this](const TokenEvent& e) {
      events.push_back(e);
      return true;
    };
  }
};

GenerationRequest basic_request(int max_new, double earliest = 0.0) {
  GenerationRequest request;
  request.messages = {{Role::user, "q1 q2 q3"}};
  request.max_new_tokens = max_new;
  request.earliest_start = earliest;
  return request;
}

LatencyModel flat_latency() {
  LatencyModel latency;
  latency.fixed_overhead_seconds = 0.1;
  latency.prefill_seconds_per_prompt_token = 0.001;
  latency.decode_seconds_per_token = 0.01;
  return latency;
}

}  // namespace

TEST_CASE("zero-jitter emission follows the closed-form deadlines") {
  SimulatedBackend backend("a", split_tokens(script_words("s1", 10)),
                           flat_latency(), fast_clock());
  Collected got;
  StreamOutcome out = backend.stream_generate(basic_request(4, 2.0),
                                              got.sink());

  REQUIRE(out.ok);
  CHECK(out.tokens_emitted == 4);
  CHECK(out.text == "s1w1 s1w2 s1w3 s1w4");
  CHECK(out.end_of_response == false);
  CHECK(out.prompt_tokens == 3);
  CHECK(out.charged_prompt_tokens == 3);
  CHECK(out.start_time == doctest::Approx(2.0).epsilon(1e-12));

  // t_k = anchor + overhead + prefill*3 + k*decode
  REQUIRE(got.events.size() == 4);
  for (int k = 1; k <= 4; ++k) {
    double expect = 2.0 + 0.1 + 0.003 + 0.01 * k;
    CHECK(got.events[k - 1].timestamp ==
          doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(out.end_time == doctest::Approx(2.0 + 0.103 + 0.04).epsilon(1e-12));
  CHECK(got.events[0].text_delta == "s1w1");
  CHECK(got.events[1].text_delta == " s1w2");
}

TEST_CASE("continuation resumes the script at the next token") {
  SimulatedBackend backend("a", split_tokens(script_words("s1", 10)),
                           flat_latency(), fast_clock());
  Collected first;
  StreamOutcome head = backend.stream_generate(basic_request(4),
                                               first.sink());
  REQUIRE(head.ok);

  GenerationRequest request = basic_request(6, head.end_time);
  request.continuation_text = head.text;
  Collected rest;
  StreamOutcome tail = backend.stream_generate(request, rest.sink());

  REQUIRE(tail.ok);
  CHECK(tail.tokens_emitted == 6);
  CHECK(tail.end_of_response == true);  // exactly drained the script
  CHECK(head.text + tail.text == script_words("s1", 10));
  CHECK(rest.events.front().text_delta.front() == ' ');
  // continuation tokens count toward the prompt
  CHECK(tail.prompt_tokens == 3 + 4);

  SUBCASE("requesting past the end is a script mismatch") {
    GenerationRequest beyond = basic_request(1);
    beyond.continuation_text = head.text + tail.text;
    Collected none;
    StreamOutcome out = backend.stream_generate(beyond, none.sink());
    CHECK(!out.ok);
    CHECK(out.error == StreamErrorKind::script_mismatch);
  }
}

TEST_CASE("a continuation that is not the emitted prefix is rejected") {
  SimulatedBackend backend("a", {"x", "y", "z"}, flat_latency(),
                           fast_clock());
  GenerationRequest request = basic_request(2);
  request.continuation_text = "different words";
  Collected got;
  StreamOutcome out = backend.stream_generate(request, got.sink());
  CHECK(!out.ok);
  CHECK(out.error == StreamErrorKind::script_mismatch);
  CHECK(got.events.empty());
}

TEST_CASE("sink cancellation stops the stream mid-chunk") {
  SimulatedBackend backend("a", split_tokens(script_words("s1", 8)),
                           flat_latency(), fast_clock());
  int seen = 0;
  StreamOutcome out = backend.stream_generate(
      basic_request(8), [&](const TokenEvent&) { return ++seen < 3; });
  CHECK(!out.ok);
  CHECK(out.error == StreamErrorKind::canceled);
  CHECK(out.tokens_emitted == 3);
  CHECK(out.text == "s1w1 s1w2 s1w3");
}

TEST_CASE("cached prefix bytes are not charged for prefill") {
  LatencyModel latency = flat_latency();
  SimulatedBackend backend("a", {"t1", "t2"}, latency, fast_clock());
  GenerationRequest request;
  request.messages = {{Role::system, "s1 s2 s3 s4"}, {Role::user, "u1"}};
  request.cached_prefix_text = "s1 s2 s3 s4";
  request.max_new_tokens = 1;
  Collected got;
  StreamOutcome out = backend.stream_generate(request, got.sink());

  REQUIRE(out.ok);
  CHECK(out.prompt_tokens == 5);
  CHECK(out.charged_prompt_tokens == 1);
  CHECK(got.events[0].timestamp ==
        doctest::Approx(0.1 + 0.001 * 1 + 0.01).epsilon(1e-12));
}

TEST_CASE("jitter draws are deterministic, bounded, and identity-keyed") {
  JitterSpec jitter{1234, 0.3};
  double u = jitter_unit(jitter, "alice", 0, 0);
  CHECK(u == jitter_unit(jitter, "alice", 0, 0));
  CHECK(u >= 0.0);
  CHECK(u < 1.0);
  CHECK(jitter_unit(jitter, "alice", 0, 1) != u);
  CHECK(jitter_unit(jitter, "alice", 1, 0) != u);
  CHECK(jitter_unit(jitter, "bob", 0, 0) != u);

  LatencyModel latency = flat_latency();
  latency.jitter = jitter;
  std::vector<double> times =
      sim_event_times(latency, "alice", 0, 5.0, 3, 6);
  REQUIRE(times.size() == 6);
  CHECK(times == sim_event_times(latency, "alice", 0, 5.0, 3, 6));
  CHECK(times != sim_event_times(latency, "alice", 1, 5.0, 3, 6));

  // First event: anchor + J0*(overhead + prefill*3), J0 in [1, 1.3)
  double base0 = 0.1 + 0.003;
  CHECK(times[0] >= 5.0 + base0 + 0.01);
  CHECK(times[0] < 5.0 + 1.3 * (base0 + 0.01));
  for (std::size_t k = 1; k < times.size(); ++k) {
    double gap = times[k] - times[k - 1];
    CHECK(gap >= 0.01);
    CHECK(gap < 0.013);
  }
}

TEST_CASE("two backends replaying the same identity agree") {
  LatencyModel latency = flat_latency();
  latency.jitter = {77, 0.25};
  auto clock = fast_clock();
  SimulatedBackend one("same", {"a", "b", "c"}, latency, clock);
  SimulatedBackend two("same", {"a", "b", "c"}, latency, clock);
  Collected left;
  Collected right;
  one.stream_generate(basic_request(3), left.sink());
  two.stream_generate(basic_request(3), right.sink());
  REQUIRE(left.events.size() == right.events.size());
  for (std::size_t i = 0; i < left.events.size(); ++i)
    CHECK(left.events[i].timestamp == right.events[i].timestamp);
}

TEST_CASE("paced emission tracks the wall clock") {
  auto clock = std::make_shared<RunClock>();
  clock->time_scale = 1.0;
  LatencyModel latency;
  latency.fixed_overhead_seconds = 0.01;
  latency.decode_seconds_per_token = 0.005;
  latency.prefill_seconds_per_prompt_token = 0.0;
  SimulatedBackend backend("a", split_tokens(script_words("s", 5)), latency,
                           clock);

  auto before = std::chrono::steady_clock::now();
  Collected got;
  StreamOutcome out = backend.stream_generate(basic_request(5), got.sink());
  double wall = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - before)
                    .count();

  REQUIRE(out.ok);
  CHECK(wall >= 0.035);  // overhead + 5 decode gaps
  CHECK(wall < 2.0);
  CHECK(out.max_lag_seconds >= 0.0);
}

TEST_CASE("make_backend resolves scripts from text or file") {
  auto clock = fast_clock();

  BackendRef inline_ref;
  inline_ref.script_text = "one two";
  auto backend = make_backend(inline_ref, "x", clock);
  CHECK(backend->is_simulated());

  std::string path = "sim_backend_script_test.txt";
  {
    std::ofstream out(path);
    out << "from file";
  }
  BackendRef file_ref;
  file_ref.script_file = path;
  CHECK(load_script(file_ref, "x") ==
        std::vector<std::string>{"from", "file"});

  // inline text wins over the file when both are set
  file_ref.script_text = "inline wins";
  CHECK(load_script(file_ref, "x") ==
        std::vector<std::string>{"inline", "wins"});
  std::remove(path.c_str());

  BackendRef empty_ref;
  CHECK_THROWS_AS(make_backend(empty_ref, "x", clock), std::runtime_error);
  BackendRef missing_file;
  missing_file.script_file = "does_not_exist_anywhere.txt";
  CHECK_THROWS_AS(load_script(missing_file, "x"), std::runtime_error);

  BackendRef http_ref;
  http_ref.kind = BackendKind::http;
  http_ref.base_url = "http://127.0.0.1:1";
  auto live = make_backend(http_ref, "x", clock);
  CHECK(!live->is_simulated());
}
