#include "spark/ppo_math.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spark/error.hpp"

namespace spark {

double advantage(double reward, double v_old) { return reward - v_old; }

double ratio(double logp_new, double logp_old) { return std::exp(logp_new - logp_old); }

double clip_objective(double r, double adv, double eps) {
  if (!(eps > 0.0)) throw Error(Errc::invalid_config, "clip epsilon must be > 0");
  const double clipped = std::clamp(r, 1.0 - eps, 1.0 + eps);
  return std::min(r * adv, clipped * adv);
}

bool clip_objective_active(double r, double adv, double eps) {
  const double clipped = std::clamp(r, 1.0 - eps, 1.0 + eps);
  if (r >= 1.0 - eps && r <= 1.0 + eps) return true;
  return r * adv < clipped * adv;
}

double kl_penalty(std::span<const double> logp_new, std::span<const double> logp_old) {
  if (logp_new.size() != logp_old.size())
    throw Error(Errc::length_mismatch, "kl_penalty: " + std::to_string(logp_new.size()) + " vs " +
                                           std::to_string(logp_old.size()));
  if (logp_new.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < logp_new.size(); ++i) {
    const double d = logp_new[i] - logp_old[i];
    total += d * d;
  }
  return total / static_cast<double>(logp_new.size());
}

double mean_clip_objective(std::span<const SurrogateTerm> batch, double eps) {
  if (batch.empty()) throw Error(Errc::empty_batch, "actor batch is empty");
  double total = 0.0;
  for (const auto& t : batch) total += clip_objective(ratio(t.logp_new, t.logp_old), t.advantage, eps);
  return total / static_cast<double>(batch.size());
}

double actor_loss(std::span<const SurrogateTerm> batch, double eps, double kl_coef) {
  const double clip = mean_clip_objective(batch, eps);
  double kl = 0.0;
  for (const auto& t : batch) {
    const double d = t.logp_new - t.logp_old;
    kl += d * d;
  }
  kl /= static_cast<double>(batch.size());
  return -clip + kl_coef * kl;
}

double critic_loss(std::span<const double> v_pred, std::span<const double> returns) {
  if (v_pred.size() != returns.size())
    throw Error(Errc::length_mismatch, "critic_loss: " + std::to_string(v_pred.size()) + " vs " +
                                           std::to_string(returns.size()));
  if (v_pred.empty()) throw Error(Errc::empty_batch, "critic batch is empty");
  double total = 0.0;
  for (std::size_t i = 0; i < v_pred.size(); ++i) {
    const double d = v_pred[i] - returns[i];
    total += d * d;
  }
  return total / static_cast<double>(v_pred.size());
}

}  // namespace spark
