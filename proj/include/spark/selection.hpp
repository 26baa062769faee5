#pragma once

// Behavior policies used while generating trajectories.

#include <array>
#include <cstdint>

#include "spark/actions.hpp"
#include "spark/task_world.hpp"

namespace spark {

struct SelectionConfig {
  double threshold = 6.0;  // inclusive; must lie in [0,10]
};

// Per-run tool pick counts; only ever grows.
class UsageCounter {
 public:
  UsageCounter() = default;
  explicit UsageCounter(const std::array<int, kNumActions>& counts);

  void record(ActionId a) { ++counts_[index_of(a)]; }
  int count(ActionId a) const { return counts_[index_of(a)]; }
  int total() const;
  const std::array<int, kNumActions>& counts() const { return counts_; }

 private:
  std::array<int, kNumActions> counts_{};
};

// Rarity-first exploitation:
//   1. cot if its score beats every tool strictly;
//   2. otherwise the lowest-scoring tool with score >= threshold, ties going to
//      the less-used tool, then the lower index;
//   3. cot when no tool passes.
ActionId select_rarity_first(const JudgeScores& scores, const UsageCounter& usage, const SelectionConfig& cfg);

// Highest score over all nine actions, lowest index on ties.
ActionId select_greedy(const JudgeScores& scores);

// Uniform over the nine actions; deterministic in the seed.
ActionId select_random(std::uint64_t rng_seed);

}  // namespace spark
