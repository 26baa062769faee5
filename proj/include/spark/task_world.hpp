#pragma once

// Seeded synthetic environment: hidden per-step tool usefulness plus a
// programmatic judge that scores candidate actions on a 0-10 scale.
//
// Each task has one of four task types. Usefulness rows are a per-task
// perturbation of a prototype row shared by every task of the same type at the
// same step, so a policy that only sees (task type, step) can learn which
// actions help. Every prototype row has one dominant action (`search` before
// the final step, `cot` on it), two viable specialist tools chosen per step,
// and weak filler whose values depend on the task type.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spark/actions.hpp"

namespace spark {

inline constexpr int kNumTaskTypes = 4;
inline constexpr double kViableUsefulness = 0.6;
inline constexpr double kProcessOkCutoff = 0.4;

struct HiddenTask {
  std::string qid;
  int task_type = 0;
  int K = 5;
  std::vector<ActionScores> usefulness;  // K rows, entries in [0,1]
  double difficulty = 0.0;
  double answer_threshold = 0.5;

  // step is 1-based; throws Error(step_out_of_range).
  const ActionScores& row(int step) const;
  double u(int step, ActionId a) const { return row(step)[index_of(a)]; }
};

struct JudgeScores {
  ActionScores scores{};
  double best_score = 0.0;
  ActionId best_action = ActionId::calculator;
};

// Builds a JudgeScores from raw scores, filling best_score / best_action
// (lowest index wins ties).
JudgeScores make_judge_scores(const ActionScores& scores);

// Deterministic in (seed, qid). Throws Error(invalid_config) for K < 1 or
// difficulty outside [0,1].
HiddenTask sample_task(std::uint64_t seed, const std::string& qid, int K, double difficulty,
                       double answer_threshold = 0.5);

// scores[a] = clamp(10 u + eta_a, 0, 10), eta_a ~ U[-sigma, sigma] drawn from a
// stream keyed on (noise_seed, qid, step, a).
JudgeScores score_candidates(const HiddenTask& task, int step, std::uint64_t noise_seed, double sigma = 0.5);

bool assess_process_ok(const HiddenTask& task, int step, ActionId action);

// Mean usefulness of the executed actions >= answer_threshold.
// Throws Error(length_mismatch) unless actions.size() == K.
bool judge_correct(const HiddenTask& task, std::span<const ActionId> actions);

}  // namespace spark
