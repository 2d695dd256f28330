#include "staircase/templates.hpp"

#include <algorithm>
#include <stdexcept>

namespace staircase {

namespace {

const char kMoaInstruction[] =
    "You have been provided with a set of responses from various open-source "
    "models to the latest user query. Your task is to synthesize these "
    "responses into a single, high-quality response. It is crucial to "
    "critically evaluate the information provided in these responses, "
    "recognizing that some of it may be biased or incorrect. Your response "
    "should not simply replicate the given answers but should offer a "
    "refined, accurate, and comprehensive reply to the instruction. Ensure "
    "your response is well-structured, coherent, and adheres to the highest "
    "standards of accuracy and reliability.";

const char kMoaPrefixCacheInstruction[] =
    "You have been provided with a set of responses from various open-source "
    "models to the latest user query in chunks. Your task is to synthesize "
    "these response chunks into a single, high-quality response. It is "
    "crucial to critically evaluate the information provided in these "
    "responses, recognizing that some of it may be biased or incorrect. As "
    "some responses may be incomplete yet, craft your synthesized response "
    "to allow for easy updating or expansion as new information becomes "
    "available. Your response should not simply replicate the given answers "
    "but should offer a refined, accurate, and comprehensive reply to the "
    "instruction. Ensure your response is well-structured, coherent, and "
    "adheres to the highest standards of accuracy and reliability.";

const char kResponsesHeader[] = "Responses from models:";

const char kMadOthersHeader[] =
    "These are the responses to the query from other agents:";

const char kMadReask[] =
    "Using the responses from other agents as additional information, can "
    "you provide your response to the query?\nThe original query is ";

}  // namespace

ChunkLedger::ChunkLedger(std::vector<std::string> agent_names)
    : names_(std::move(agent_names)), texts_(names_.size()) {}

void ChunkLedger::record(std::size_t agent_index, int round,
                         std::string text) {
  std::vector<std::string>& agent_texts = texts_.at(agent_index);
  if (round != static_cast<int>(agent_texts.size()) + 1)
    throw std::logic_error("ChunkLedger::record: rounds must be consecutive");
  agent_texts.push_back(std::move(text));
  pending_.push_back({agent_index, round});
  ++total_;
}

std::string ChunkLedger::accumulated(std::size_t index) const {
  std::string out;
  for (const std::string& t : texts_.at(index)) out += t;
  return out;
}

void ChunkLedger::seal_render() {
  std::stable_sort(pending_.begin(), pending_.end(),
                   [](const PcEntry& a, const PcEntry& b) {
                     if (a.round != b.round) return a.round < b.round;
                     return a.agent_index < b.agent_index;
                   });
  for (const PcEntry& e : pending_) {
    int target = std::max(e.round, last_rendered_block_);
    if (static_cast<int>(blocks_.size()) < target) blocks_.resize(target);
    blocks_[target - 1].push_back(e);
  }
  pending_.clear();
  for (std::size_t k = blocks_.size(); k > 0; --k) {
    if (!blocks_[k - 1].empty()) {
      last_rendered_block_ = static_cast<int>(k);
      break;
    }
  }
}

std::vector<Message> render_moa(const ChunkLedger& ledger,
                                const std::string& query) {
  std::string system = kMoaInstruction;
  system += "\n\n";
  system += kResponsesHeader;
  int n = 0;
  for (std::size_t i = 0; i < ledger.agent_count(); ++i) {
    if (!ledger.has_chunks(i)) continue;
    ++n;
    system += "\n" + std::to_string(n) + ". " + ledger.accumulated(i);
  }
  return {{Role::system, std::move(system)}, {Role::user, query}};
}

std::vector<Message> render_moa_prefix_cache(const ChunkLedger& ledger,
                                             const std::string& query) {
  std::string system = kMoaPrefixCacheInstruction;
  system += "\n\n";
  system += kResponsesHeader;
  const auto& blocks = ledger.pc_blocks();
  bool first_block = true;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if (blocks[k].empty()) continue;
    system += first_block ? "\n" : "\n\n";
    first_block = false;
    system += "Chunk " + std::to_string(k + 1) + ":";
    for (const ChunkLedger::PcEntry& e : blocks[k]) {
      system += "\nModel " + std::to_string(e.agent_index + 1) + ":\n" +
                ledger.chunks(e.agent_index).at(e.round - 1);
    }
  }
  return {{Role::system, std::move(system)}, {Role::user, query}};
}

std::vector<Message> render_mad(const ChunkLedger& ledger,
                                std::size_t self_index,
                                const std::string& query) {
  std::string debate = kMadOthersHeader;
  debate += "\n\n";
  for (std::size_t i = 0; i < ledger.agent_count(); ++i) {
    if (i == self_index || !ledger.has_chunks(i)) continue;
    debate += "One agent solution: " + ledger.accumulated(i) + "\n\n";
  }
  debate += kMadReask;
  debate += query;
  return {{Role::user, query},
          {Role::assistant, ledger.accumulated(self_index)},
          {Role::user, std::move(debate)}};
}

}  // namespace staircase
