#include "spark/reward.hpp"

#include <cmath>
#include <string>

#include "spark/error.hpp"

namespace spark {

std::string_view to_string(ProcessOkSign sign) { return sign == ProcessOkSign::literal ? "literal" : "flipped"; }

ProcessOkSign parse_process_ok_sign(std::string_view text) {
  if (text == "literal") return ProcessOkSign::literal;
  if (text == "flipped") return ProcessOkSign::flipped;
  throw Error(Errc::invalid_config, "process_ok_sign must be 'literal' or 'flipped', got '" + std::string(text) + "'");
}

double composite_reward(double chosen, double best, bool process_ok, const RewardConfig& cfg) {
  if (!(cfg.rho >= 0.0 && cfg.rho <= 1.0)) throw Error(Errc::invalid_config, "rho must be in [0,1]");
  if (!(chosen >= 0.0 && chosen <= best && best <= 10.0))
    throw Error(Errc::invalid_scores,
                "need 0 <= chosen <= best <= 10, got chosen=" + std::to_string(chosen) + " best=" + std::to_string(best));
  const double ok = process_ok ? 1.0 : 0.0;
  const double gap_term = cfg.rho * (best - chosen);
  const double ok_term = (1.0 - cfg.rho) * ok;
  return cfg.process_ok_sign == ProcessOkSign::literal ? gap_term - ok_term : gap_term + ok_term;
}

double raw_reward(double chosen) {
  if (!(chosen >= 0.0 && chosen <= 10.0))
    throw Error(Errc::out_of_range, "chosen_score must be in [0,10], got " + std::to_string(chosen));
  return chosen;
}

}  // namespace spark
