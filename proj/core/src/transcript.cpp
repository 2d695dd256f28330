#include "staircase/transcript.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <tuple>

namespace staircase {

void sort_chunks(std::vector<Chunk>& chunks) {
  std::stable_sort(chunks.begin(), chunks.end(),
                   [](const Chunk& a, const Chunk& b) {
                     return std::tie(a.t_end, a.agent_index, a.round) <
                            std::tie(b.t_end, b.agent_index, b.round);
                   });
}

void to_json(nlohmann::json& j, const RoundPrompt& p) {
  j = {{"round", p.round}, {"messages", p.messages}};
}

void from_json(const nlohmann::json& j, RoundPrompt& p) {
  p.round = j.value("round", 0);
  p.messages.clear();
  if (j.contains("messages"))
    p.messages = j.at("messages").get<std::vector<Message>>();
}

void to_json(nlohmann::json& j, const RunTranscript& t) {
  j = {{"config", t.config},
       {"mode", t.mode},
       {"chunks", t.chunks},
       {"aggregator_prompts", t.aggregator_prompts},
       {"final_text", t.final_text},
       {"events", t.events}};
  if (t.metrics) j["metrics"] = *t.metrics;
}

void from_json(const nlohmann::json& j, RunTranscript& t) {
  t = RunTranscript{};
  if (j.contains("config")) t.config = j.at("config").get<PipelineConfig>();
  t.mode = j.value("mode", std::string());
  if (j.contains("chunks")) t.chunks = j.at("chunks").get<std::vector<Chunk>>();
  if (j.contains("aggregator_prompts"))
    t.aggregator_prompts =
        j.at("aggregator_prompts").get<std::vector<RoundPrompt>>();
  t.final_text = j.value("final_text", std::string());
  if (j.contains("metrics")) t.metrics = j.at("metrics").get<RunMetrics>();
  if (j.contains("events"))
    t.events = j.at("events").get<std::vector<EngineEvent>>();
}

}  // namespace staircase
