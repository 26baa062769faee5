#pragma once

// Offline PPO over a fixed dataset of sub-trajectory steps.
//
// Per epoch: snapshot logp_old and v_old with the epoch-start parameters,
// shuffle, then for each batch take one gradient step on the actor loss and
// one on the critic MSE. After each actor step the batch KL (mean squared
// log-prob shift, dropout off) is compared with target_kl; once exceeded, the
// actor is frozen for the rest of the epoch while the critic keeps training.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spark/policy_net.hpp"
#include "spark/ppo_math.hpp"
#include "spark/reward.hpp"
#include "spark/trajectory.hpp"

namespace spark {

struct TrainerConfig {
  double lr = 1e-5;
  double clip_eps = 0.2;
  double kl_coef = 0.1;
  double target_kl = 0.2;
  int batch_size = 8;
  int epochs = 4;
  RewardConfig reward;
  std::uint64_t seed = 42;
  std::string profile = "reference";

  void validate() const;  // throws Error(invalid_config)
};

struct UpdateRecord {
  int epoch = 0;
  int batch = 0;
  double clip_objective = 0.0;
  double actor_loss = 0.0;
  double kl = 0.0;
  double critic_loss = 0.0;
  bool actor_updated = false;
  bool early_stop = false;  // this batch crossed target_kl
};

struct TrainLog {
  std::vector<UpdateRecord> updates;
  double lr = 0.0;
  std::string profile;
  int epochs = 0;
  int early_stops = 0;
  double final_critic_loss = 0.0;
  double final_actor_loss = 0.0;
};

// One training row with epoch-start snapshots filled in.
struct Transition {
  StateFeatures state;
  ActionId action = ActionId::cot;
  double reward = 0.0;
  double logp_old = 0.0;
  double v_old = 0.0;
  std::uint64_t dropout_seed = 0;
};

// Rewards for every record via composite_reward.
std::vector<Transition> make_transitions(const Dataset& dataset, const RewardConfig& reward);

// Runs the batches of one epoch in the given order and returns their records.
// logp_old / v_old must already be populated. Throws Error(non_finite_loss).
std::vector<UpdateRecord> run_epoch(int epoch, std::span<const Transition> ordered, ActorParams& actor,
                                    CriticParams& critic, const TrainerConfig& cfg);

struct TrainResult {
  ActorParams actor;
  CriticParams critic;
  TrainLog log;
  std::uint64_t rng_state = 0;
};

// Throws Error(invalid_dataset) if the dataset does not validate or its state
// width does not match the actor, Error(non_finite_loss) on divergence.
TrainResult train(const Dataset& dataset, ActorParams actor, CriticParams critic, const TrainerConfig& cfg);

std::string update_record_to_json(const UpdateRecord& rec);
std::string train_summary_to_json(const TrainLog& log);

}  // namespace spark
