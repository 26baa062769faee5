#pragma once

#include <string_view>

namespace spark {

// Sign of the process_ok term: `literal` subtracts it (the default), `flipped`
// adds it.
enum class ProcessOkSign { literal, flipped };

std::string_view to_string(ProcessOkSign sign);
ProcessOkSign parse_process_ok_sign(std::string_view text);

struct RewardConfig {
  double rho = 0.5;  // weight of the exploration gap, in [0,1]
  ProcessOkSign process_ok_sign = ProcessOkSign::literal;
};

// literal: rho (best - chosen) - (1 - rho) [ok]
// flipped: rho (best - chosen) + (1 - rho) [ok]
// Throws Error(invalid_scores) unless 0 <= chosen <= best <= 10, and
// Error(invalid_config) for rho outside [0,1].
double composite_reward(double chosen_score, double best_score, bool process_ok, const RewardConfig& cfg);

// The executed action's judge score, logged as reward_raw.
double raw_reward(double chosen_score);

}  // namespace spark
