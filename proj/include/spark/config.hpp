#pragma once

// Run configuration shared by every CLI subcommand. A config file is a JSON
// object with the sections below; every key is optional and unknown keys are
// rejected. Precedence, lowest first: profile, config file, SPARK_SEED, flags.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "spark/eval_harness.hpp"
#include "spark/policy_net.hpp"
#include "spark/ppo_trainer.hpp"
#include "spark/reward.hpp"
#include "spark/rollout.hpp"

namespace spark {

struct WorldSection {
  std::uint64_t seed = 42;  // hidden task distribution
  int K = 5;
  double difficulty = 0.0;
  double sigma = 0.5;  // judge noise
  double answer_threshold = 0.5;
};

struct GenerationSection {
  int n_tasks = 2500;
  BehaviorMode mode = BehaviorMode::rarity;
  double threshold = 6.0;
  bool filter_correct_only = false;
};

struct TrainerSection {
  double lr = 1e-5;
  double clip_eps = 0.2;
  double kl_coef = 0.1;
  double target_kl = 0.2;
  int batch_size = 8;
  int epochs = 4;
};

struct EvalSection {
  int n_tasks = 840;
  int qid_offset = 500000;
};

struct GradcheckSection {
  double h = 1e-5;
  int n_coords = 50;
  int batch_size = 8;
  double tolerance = 1e-4;
};

struct RunConfig {
  std::string profile = "reference";
  std::uint64_t seed = 42;  // judge noise, sampling, shuffles, init, dropout
  WorldSection world;
  GenerationSection generation;
  RewardConfig reward;
  ActorConfig actor;
  TrainerSection trainer;
  EvalSection eval;
  GradcheckSection gradcheck;

  void validate() const;  // throws Error(invalid_config)
};

RunConfig reference_profile();
// lr 0.1, 100 training tasks, 200 eval tasks, difficulty 0.
RunConfig desk_profile();
RunConfig profile_by_name(std::string_view name);  // throws Error(invalid_config)

// Overlays a JSON document onto cfg. Throws Error(invalid_config) on unknown
// keys, wrong types or malformed JSON.
void apply_config_json(RunConfig& cfg, std::string_view text);
// Throws Error(io_error) if the file cannot be read.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);
// SPARK_SEED, if set, replaces cfg.seed. Throws Error(invalid_config) if it is
// not an unsigned integer.
void apply_env(RunConfig& cfg);

std::string config_to_json(const RunConfig& cfg);

GenerationConfig generation_config(const RunConfig& cfg);
TrainerConfig trainer_config(const RunConfig& cfg);
EvalConfig eval_config(const RunConfig& cfg);

}  // namespace spark
