#include "spark/selection.hpp"

#include <numeric>

#include "spark/error.hpp"
#include "spark/rng.hpp"

namespace spark {

UsageCounter::UsageCounter(const std::array<int, kNumActions>& counts) : counts_(counts) {
  for (int c : counts_)
    if (c < 0) throw Error(Errc::invalid_config, "usage counts must be non-negative");
}

int UsageCounter::total() const { return std::accumulate(counts_.begin(), counts_.end(), 0); }

ActionId select_rarity_first(const JudgeScores& js, const UsageCounter& usage, const SelectionConfig& cfg) {
  if (!(cfg.threshold >= 0.0 && cfg.threshold <= 10.0))
    throw Error(Errc::invalid_config, "selection threshold must be in [0,10]");
  const auto& s = js.scores;
  const double cot = s[index_of(ActionId::cot)];

  double best_tool = s[0];
  for (std::size_t a = 1; a < kNumTools; ++a) best_tool = std::max(best_tool, s[a]);
  if (cot > best_tool) return ActionId::cot;

  int pick = -1;
  for (std::size_t a = 0; a < kNumTools; ++a) {
    if (s[a] < cfg.threshold) continue;
    if (pick < 0) {
      pick = static_cast<int>(a);
      continue;
    }
    const auto p = static_cast<std::size_t>(pick);
    if (s[a] < s[p] || (s[a] == s[p] && usage.count(action_at(a)) < usage.count(action_at(p))))
      pick = static_cast<int>(a);
  }
  return pick < 0 ? ActionId::cot : action_at(static_cast<std::size_t>(pick));
}

ActionId select_greedy(const JudgeScores& js) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < kNumActions; ++a)
    if (js.scores[a] > js.scores[best]) best = a;
  return action_at(best);
}

ActionId select_random(std::uint64_t rng_seed) {
  Rng rng(derive_seed({rng_seed, 0x72616e64}));
  return action_at(rng.below(kNumActions));
}

}  // namespace spark
