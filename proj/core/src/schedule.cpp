#include "staircase/schedule.hpp"

#include <algorithm>
#include <stdexcept>

namespace staircase {

int chunk_size(const ChunkSchedule& schedule, AgentRole role, int round) {
  if (round < 1) throw std::invalid_argument("chunk_size: round must be >= 1");
  if (round == 1) return schedule.first_chunk_size;
  if (round == 2) return schedule.second_chunk_size;
  return role == AgentRole::proposer ? schedule.chunk_size
                                     : schedule.aggregator_chunk_size;
}

int quorum(int n_active_proposers, const ChunkSchedule& schedule,
           RedundancyScope scope, int round) {
  if (n_active_proposers < 1)
    throw std::invalid_argument("quorum: need at least one active proposer");
  if (round < 1) throw std::invalid_argument("quorum: round must be >= 1");
  const bool applies =
      scope == RedundancyScope::all_rounds || round == 1;
  int q = applies ? n_active_proposers - schedule.redundancy
                  : n_active_proposers;
  return std::clamp(q, 1, n_active_proposers);
}

}  // namespace staircase
