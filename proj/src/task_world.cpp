#include "spark/task_world.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <vector>

#include "spark/error.hpp"
#include "spark/rng.hpp"

namespace spark {

namespace {

constexpr std::uint64_t kPrototypeStream = 0x70726f746f;  // "proto"
constexpr std::uint64_t kTaskStream = 0x7461736b;         // "task"
constexpr std::uint64_t kJudgeStream = 0x6a75646765;      // "judge"

constexpr double kTaskJitter = 0.08;
constexpr double kDifficultyShift = 0.15;

constexpr std::size_t kSpecialistsPerStep = 2;

// Specialist tools for one step, never `search`.
std::vector<std::size_t> specialists(std::uint64_t seed, int step) {
  Rng rng(derive_seed({seed, kPrototypeStream, 0x73706563, static_cast<std::uint64_t>(step)}));  // specialist stream
  std::vector<std::size_t> pool;
  for (std::size_t a = 0; a < kNumTools; ++a)
    if (a != index_of(ActionId::search)) pool.push_back(a);
  for (std::size_t i = pool.size() - 1; i > 0; --i) std::swap(pool[i], pool[rng.below(i + 1)]);
  pool.resize(kSpecialistsPerStep);
  return pool;
}

// Each step has two viable specialists that score below the dominant action
// (`search` before the final step, `cot` on it). The task type only perturbs
// the filler entries, so the rarity-first pick depends on the step alone.
ActionScores prototype_row(std::uint64_t seed, int task_type, int step, int K) {
  Rng rng(derive_seed({seed, kPrototypeStream, static_cast<std::uint64_t>(task_type),
                       static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(K)}));
  ActionScores row{};
  for (std::size_t a = 0; a < kNumTools; ++a) row[a] = rng.uniform(0.0, 0.35);
  if (step == K) {
    row[index_of(ActionId::cot)] = rng.uniform(0.82, 0.95);
    row[index_of(ActionId::search)] = rng.uniform(0.35, 0.55);
  } else {
    row[index_of(ActionId::cot)] = rng.uniform(0.3, 0.5);
    row[index_of(ActionId::search)] = rng.uniform(0.82, 0.95);
  }
  for (std::size_t tool : specialists(seed, step)) row[tool] = rng.uniform(0.64, 0.78);
  return row;
}

void require_step(const HiddenTask& task, int step) {
  if (step < 1 || step > task.K)
    throw Error(Errc::step_out_of_range,
                "step " + std::to_string(step) + " outside 1.." + std::to_string(task.K) + " for " + task.qid);
}

}  // namespace

const ActionScores& HiddenTask::row(int step) const {
  require_step(*this, step);
  return usefulness[static_cast<std::size_t>(step - 1)];
}

JudgeScores make_judge_scores(const ActionScores& scores) {
  JudgeScores j;
  j.scores = scores;
  const auto best = std::max_element(scores.begin(), scores.end());  // first max
  j.best_score = *best;
  j.best_action = action_at(static_cast<std::size_t>(best - scores.begin()));
  return j;
}

HiddenTask sample_task(std::uint64_t seed, const std::string& qid, int K, double difficulty,
                       double answer_threshold) {
  if (K < 1) throw Error(Errc::invalid_config, "K must be >= 1");
  if (!(difficulty >= 0.0 && difficulty <= 1.0)) throw Error(Errc::invalid_config, "difficulty must be in [0,1]");

  Rng rng(derive_seed({seed, kTaskStream, hash_string(qid)}));
  HiddenTask task;
  task.qid = qid;
  task.K = K;
  task.difficulty = difficulty;
  task.answer_threshold = answer_threshold;
  task.task_type = static_cast<int>(rng.below(kNumTaskTypes));
  task.usefulness.reserve(static_cast<std::size_t>(K));

  for (int step = 1; step <= K; ++step) {
    ActionScores row = prototype_row(seed, task.task_type, step, K);
    for (double& u : row)
      u = std::clamp(u + rng.uniform(-kTaskJitter, kTaskJitter) - kDifficultyShift * difficulty, 0.0, 1.0);
    auto best = std::max_element(row.begin(), row.end());
    if (*best < kViableUsefulness) *best = kViableUsefulness;
    task.usefulness.push_back(row);
  }
  return task;
}

JudgeScores score_candidates(const HiddenTask& task, int step, std::uint64_t noise_seed, double sigma) {
  require_step(task, step);
  if (!(sigma >= 0.0)) throw Error(Errc::invalid_config, "judge noise sigma must be >= 0");
  const ActionScores& row = task.row(step);
  const std::uint64_t qid_hash = hash_string(task.qid);

  ActionScores scores{};
  for (std::size_t a = 0; a < kNumActions; ++a) {
    Rng rng(derive_seed({noise_seed, kJudgeStream, qid_hash, static_cast<std::uint64_t>(step), a}));
    const double eta = sigma * (2.0 * rng.uniform() - 1.0);
    scores[a] = std::clamp(10.0 * row[a] + eta, 0.0, 10.0);
  }
  return make_judge_scores(scores);
}

bool assess_process_ok(const HiddenTask& task, int step, ActionId action) {
  return task.u(step, action) >= kProcessOkCutoff;
}

bool judge_correct(const HiddenTask& task, std::span<const ActionId> actions) {
  if (static_cast<int>(actions.size()) != task.K)
    throw Error(Errc::length_mismatch,
                "expected " + std::to_string(task.K) + " actions, got " + std::to_string(actions.size()));
  double total = 0.0;
  for (int k = 1; k <= task.K; ++k) total += task.u(k, actions[static_cast<std::size_t>(k - 1)]);
  return total / task.K >= task.answer_threshold;
}

}  // namespace spark
