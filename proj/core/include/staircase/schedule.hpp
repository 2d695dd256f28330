#pragma once

namespace staircase {

enum class AgentRole { proposer, aggregator };

// When redundancy is nonzero, it shrinks the quorum either for the first
// round only (default) or for every round.
enum class RedundancyScope { first_round_only, all_rounds };

// Per-round generation sizes. Round 1 and round 2 sizes apply to both roles;
// from round 3 on proposers and the aggregator use their own steady size.
struct ChunkSchedule {
  int first_chunk_size = 8;
  int second_chunk_size = 128;
  int chunk_size = 256;             // steady-state proposer size
  int aggregator_chunk_size = 128;  // steady-state aggregator size
  int redundancy = 2;
};

// Number of tokens the given role generates in round `round` (1-based).
int chunk_size(const ChunkSchedule& schedule, AgentRole role, int round);

// How many round-`round` chunks the aggregator waits for, given
// `n_active_proposers` agents that can still deliver one. Redundancy is
// subtracted when the scope says it applies; the result is clamped to
// [1, n_active_proposers].
int quorum(int n_active_proposers, const ChunkSchedule& schedule,
           RedundancyScope scope, int round);

}  // namespace staircase
