#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "staircase/model.hpp"

namespace staircase {

// Append-only record of the chunks each agent has produced so far, in round
// order. Exactly one writer (the consuming loop) mutates a ledger; renderers
// are pure functions of its state.
//
// For the prefix-cache template the ledger additionally tracks which
// "Chunk k:" block every entry belongs to. Call seal_render() right before
// each render: entries recorded since the previous seal get their block
// assigned, and blocks an earlier render displayed only ever gain appended
// entries. A late entry whose natural round was already rendered lands in
// the newest rendered block, so a re-render only ever appends bytes.
class ChunkLedger {
 public:
  explicit ChunkLedger(std::vector<std::string> agent_names);

  std::size_t agent_count() const { return names_.size(); }
  const std::string& agent_name(std::size_t index) const {
    return names_.at(index);
  }

  // Records the next chunk of `agent_index`. Rounds must be consecutive
  // starting at 1 for each agent.
  void record(std::size_t agent_index, int round, std::string text);

  const std::vector<std::string>& chunks(std::size_t index) const {
    return texts_.at(index);
  }
  bool has_chunks(std::size_t index) const {
    return !texts_.at(index).empty();
  }
  std::string accumulated(std::size_t index) const;
  int total_chunks() const { return total_; }

  void seal_render();

  struct PcEntry {
    std::size_t agent_index;
    int round;
  };
  // pc_blocks()[k] holds the entries under "Chunk k+1:".
  const std::vector<std::vector<PcEntry>>& pc_blocks() const {
    return blocks_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<std::string>> texts_;
  std::vector<std::vector<PcEntry>> blocks_;
  std::vector<PcEntry> pending_;
  int last_rendered_block_ = 0;  // 1-based; 0 before the first seal
  int total_ = 0;
};

// Aggregate-and-synthesize prompt: numbered full responses in the system
// message. Agents without any chunk yet are omitted and the numbering is
// compacted.
std::vector<Message> render_moa(const ChunkLedger& ledger,
                                const std::string& query);

// Chunk-grouped variant whose system message only ever grows by appended
// bytes, so providers can serve it from a prefix cache. Model numbers are
// the 1-based ledger positions and stay stable across rounds.
std::vector<Message> render_moa_prefix_cache(const ChunkLedger& ledger,
                                             const std::string& query);

// Debate prompt for one agent: the original query, its own accumulated
// response as an assistant turn, then the other agents' accumulated
// responses and the closing re-ask.
std::vector<Message> render_mad(const ChunkLedger& ledger,
                                std::size_t self_index,
                                const std::string& query);

}  // namespace staircase
