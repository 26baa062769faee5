#pragma once

// Scalar pieces of the offline PPO objective.

#include <span>

namespace spark {

double advantage(double reward, double v_old);

double ratio(double logp_new, double logp_old);

// min(r * adv, clamp(r, 1 - eps, 1 + eps) * adv)
double clip_objective(double r, double adv, double eps);

// True when the unclipped branch is the one selected by the min, i.e. the
// objective has slope r * adv with respect to logp_new.
bool clip_objective_active(double r, double adv, double eps);

// Mean squared log-probability difference. Throws Error(length_mismatch).
double kl_penalty(std::span<const double> logp_new, std::span<const double> logp_old);

struct SurrogateTerm {
  double logp_new = 0.0;
  double logp_old = 0.0;
  double advantage = 0.0;
};

// Minimised scalar: -mean(clip_objective) + kl_coef * kl_penalty.
// Throws Error(empty_batch).
double actor_loss(std::span<const SurrogateTerm> batch, double eps, double kl_coef);

// Mean clip objective alone (the quantity being maximised).
double mean_clip_objective(std::span<const SurrogateTerm> batch, double eps);

// Mean of (v_pred - R)^2. Throws Error(length_mismatch) or Error(empty_batch).
double critic_loss(std::span<const double> v_pred, std::span<const double> returns);

}  // namespace spark
