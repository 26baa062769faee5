#include <array>
#include <cmath>
#include <map>

#include "doctest.h"
#include "spark/error.hpp"
#include "spark/rng.hpp"
#include "spark/selection.hpp"

using namespace spark;

namespace {

JudgeScores from_tools(std::array<double, kNumTools> tools, double cot) {
  ActionScores s{};
  for (std::size_t i = 0; i < kNumTools; ++i) s[i] = tools[i];
  s[index_of(ActionId::cot)] = cot;
  return make_judge_scores(s);
}

// Reference written straight from the three-clause rule, with no shared code.
std::size_t reference_rarity(const ActionScores& s, const std::array<int, kNumActions>& usage, double tau) {
  const std::size_t cot = 8;
  bool cot_beats_all = true;
  for (std::size_t a = 0; a < 8; ++a)
    if (!(s[cot] > s[a])) cot_beats_all = false;
  if (cot_beats_all) return cot;

  std::size_t pick = cot;
  for (std::size_t a = 0; a < 8; ++a) {
    if (s[a] < tau) continue;
    if (pick == cot) {
      pick = a;
      continue;
    }
    const bool lower_score = s[a] < s[pick];
    const bool same_score_less_used = s[a] == s[pick] && usage[a] < usage[pick];
    if (lower_score || same_score_less_used) pick = a;
  }
  return pick;
}

}  // namespace

TEST_CASE("rarity-first picks the lowest passing tool") {
  const JudgeScores j = from_tools({6.2, 5.1, 5.8, 4.0, 7.5, 3.3, 5.0, 2.2}, 7.0);
  CHECK(select_rarity_first(j, UsageCounter{}, {}) == ActionId::calculator);
  CHECK(j.best_score == 7.5);
}

TEST_CASE("rarity-first returns a strictly superior cot") {
  const JudgeScores j = from_tools({5.0, 4.0, 5.9, 1.0, 2.0, 3.0, 0.5, 0.0}, 8.1);
  CHECK(select_rarity_first(j, UsageCounter{}, {}) == ActionId::cot);
}

TEST_CASE("cot equal to the top tool is not strictly superior") {
  const JudgeScores j = from_tools({7.0, 6.5, 0, 0, 0, 0, 0, 0}, 7.0);
  CHECK(select_rarity_first(j, UsageCounter{}, {}) == ActionId::unit_converter);
}

TEST_CASE("score ties go to the less-used tool") {
  const JudgeScores j = from_tools({6.5, 6.5, 1, 1, 1, 1, 1, 1}, 2.0);
  std::array<int, kNumActions> counts{};
  counts[0] = 3;
  counts[1] = 1;
  CHECK(select_rarity_first(j, UsageCounter(counts), {}) == ActionId::unit_converter);
  CHECK(select_rarity_first(j, UsageCounter{}, {}) == ActionId::calculator);
}

TEST_CASE("threshold is inclusive and cot is the fallback") {
  const JudgeScores at = from_tools({6.0, 0, 0, 0, 0, 0, 0, 0}, 0.0);
  CHECK(select_rarity_first(at, UsageCounter{}, {}) == ActionId::calculator);
  const JudgeScores below = from_tools({5.99, 5.0, 0, 0, 0, 0, 0, 0}, 1.0);
  CHECK(select_rarity_first(below, UsageCounter{}, {}) == ActionId::cot);
}

TEST_CASE("threshold outside [0,10] is rejected") {
  const JudgeScores j = from_tools({6.0, 0, 0, 0, 0, 0, 0, 0}, 0.0);
  CHECK_THROWS_AS(select_rarity_first(j, UsageCounter{}, {10.5}), Error);
  CHECK_THROWS_AS(select_rarity_first(j, UsageCounter{}, {-1.0}), Error);
}

TEST_CASE("rarity-first matches the brute-force reference on the score grid") {
  const double grid[] = {0.0, 3.0, 5.9, 6.0, 6.1, 10.0};
  Rng rng(2024);
  const int samples = 200000;
  int mismatches = 0;
  for (int n = 0; n < samples; ++n) {
    ActionScores s{};
    std::array<int, kNumActions> usage{};
    for (std::size_t a = 0; a < kNumActions; ++a) {
      s[a] = grid[rng.below(6)];
      usage[a] = static_cast<int>(rng.below(3));
    }
    const auto got = index_of(select_rarity_first(make_judge_scores(s), UsageCounter(usage), {6.0}));
    if (got != reference_rarity(s, usage, 6.0)) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("rarity-first properties over random scores") {
  Rng rng(5);
  for (int n = 0; n < 20000; ++n) {
    ActionScores s{};
    for (double& x : s) x = std::round(rng.uniform(0.0, 10.0) * 10.0) / 10.0;
    std::array<int, kNumActions> usage{};
    for (int& u : usage) u = static_cast<int>(rng.below(4));
    const double tau = rng.uniform(0.0, 10.0);
    const JudgeScores j = make_judge_scores(s);
    const ActionId a = select_rarity_first(j, UsageCounter(usage), {tau});
    const double chosen = s[index_of(a)];
    CHECK(chosen <= j.best_score);
    if (a != ActionId::cot) CHECK(chosen >= tau);

    int passing = 0;
    std::map<double, int> distinct;
    for (std::size_t t = 0; t < kNumTools; ++t)
      if (s[t] >= tau) {
        ++passing;
        ++distinct[s[t]];
      }
    const bool distinct_scores = static_cast<int>(distinct.size()) == passing;
    if (a != ActionId::cot && passing >= 2 && distinct_scores) CHECK(chosen < j.best_score);
  }
}

TEST_CASE("greedy is an argmax with lowest-index ties") {
  const JudgeScores j = from_tools({6.2, 5.1, 5.8, 4.0, 7.5, 3.3, 5.0, 2.2}, 7.0);
  CHECK(select_greedy(j) == ActionId::python_repl);
  CHECK(select_greedy(j) != select_rarity_first(j, UsageCounter{}, {}));
  ActionScores flat{};
  flat.fill(4.0);
  CHECK(select_greedy(make_judge_scores(flat)) == ActionId::calculator);

  Rng rng(8);
  for (int n = 0; n < 5000; ++n) {
    ActionScores s{};
    for (double& x : s) x = rng.uniform(0.0, 10.0);
    const JudgeScores r = make_judge_scores(s);
    CHECK(s[index_of(select_greedy(r))] == r.best_score);
  }
}

TEST_CASE("random selection is deterministic and uniform") {
  CHECK(select_random(17) == select_random(17));
  std::array<int, kNumActions> hist{};
  const int draws = 9000;
  for (int n = 0; n < draws; ++n) ++hist[index_of(select_random(derive_seed({99, static_cast<std::uint64_t>(n)})))];
  double entropy = 0.0;
  for (int c : hist) {
    const double f = static_cast<double>(c) / draws;
    CHECK(std::abs(f - 1.0 / 9.0) <= 0.03);  // three percentage points
    if (c > 0) entropy -= f * std::log(f);
  }
  CHECK(entropy == doctest::Approx(std::log(9.0)).epsilon(0.005));
}

TEST_CASE("usage counter only grows") {
  UsageCounter u;
  u.record(ActionId::search);
  u.record(ActionId::search);
  u.record(ActionId::cot);
  CHECK(u.count(ActionId::search) == 2);
  CHECK(u.total() == 3);
  std::array<int, kNumActions> bad{};
  bad[0] = -1;
  CHECK_THROWS_AS(UsageCounter{bad}, Error);
}
