#include "staircase/backend.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "staircase/http_backend.hpp"
#include "staircase/sim_backend.hpp"

namespace staircase {

double RunClock::wall_now() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       anchor)
      .count();
}

double RunClock::model_now() const {
  if (time_scale <= 0.0) return 0.0;
  return wall_now() / time_scale;
}

void RunClock::pace_until(double model_time) const {
  if (time_scale <= 0.0) return;
  std::this_thread::sleep_until(
      anchor + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                   std::chrono::duration<double>(model_time * time_scale)));
}

const char* to_string(StreamErrorKind kind) {
  switch (kind) {
    case StreamErrorKind::none: return "none";
    case StreamErrorKind::transport: return "transport";
    case StreamErrorKind::timeout: return "timeout";
    case StreamErrorKind::malformed_frame: return "malformed_frame";
    case StreamErrorKind::premature_close: return "premature_close";
    case StreamErrorKind::capability: return "capability";
    case StreamErrorKind::canceled: return "canceled";
    case StreamErrorKind::script_mismatch: return "script_mismatch";
  }
  return "unknown";
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    std::size_t start = i;
    while (i < text.size() &&
           !std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    if (i > start) out.emplace_back(text, start, i - start);
  }
  return out;
}

int count_tokens(const std::string& text) {
  bool in_word = false;
  int n = 0;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

std::string token_delta(const std::string& word, std::size_t position) {
  return position == 0 ? word : " " + word;
}

std::string join_tokens(const std::vector<std::string>& words,
                        std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t p = from; p < to && p < words.size(); ++p)
    out += token_delta(words[p], p);
  return out;
}

std::vector<std::string> load_script(const BackendRef& ref,
                                     const std::string& agent_name) {
  std::string script = ref.script_text;
  if (script.empty() && !ref.script_file.empty()) {
    std::ifstream in(ref.script_file);
    if (!in)
      throw std::runtime_error("cannot open script file: " + ref.script_file);
    std::ostringstream buf;
    buf << in.rdbuf();
    script = buf.str();
  }
  std::vector<std::string> words = split_tokens(script);
  if (words.empty())
    throw std::runtime_error("empty script for agent: " + agent_name);
  return words;
}

std::unique_ptr<Backend> make_backend(const BackendRef& ref,
                                      const std::string& agent_name,
                                      std::shared_ptr<const RunClock> clock) {
  if (ref.kind == BackendKind::simulated)
    return std::make_unique<SimulatedBackend>(agent_name,
                                              load_script(ref, agent_name),
                                              ref.latency, std::move(clock));
  return std::make_unique<HttpBackend>(agent_name, ref, std::move(clock));
}

}  // namespace staircase
