#pragma once

// Actor: a frozen base linear map plus a trainable low-rank adapter, producing
// log-probabilities over the nine actions. Critic: a one-hidden-layer tanh MLP
// value head. Gradients are analytic; grad_check compares them with central
// finite differences.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spark/actions.hpp"

namespace spark {

// ---------------------------------------------------------------------------
// State features
//
// Layout: task-type one-hot (4) | step one-hot (K) | usage fractions (9) |
// previous chosen score / 10 (1) | bias (1). D = 20 for K = 5.

struct Observation {
  int task_type = 0;
  int step = 1;  // 1..K
  int K = 5;
  std::array<int, kNumActions> usage{};
  double prev_chosen_score = 0.0;
  // Post-episode state: step slot saturated at K, usage normalised by K.
  bool terminal = false;
};

using StateFeatures = std::vector<double>;

int feature_dim(int K);

// Throws Error(invalid_observation).
StateFeatures featurize(const Observation& obs);

// ---------------------------------------------------------------------------

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct ActorConfig {
  int rank = 8;
  double alpha = 16.0;
  double dropout = 0.05;
  double base_scale = 0.05;  // W0 ~ U[-base_scale, base_scale]
};

struct ActorParams {
  Matrix base;          // W0, 9 x D, frozen
  Matrix adapter_down;  // A, r x D
  Matrix adapter_up;    // B, 9 x r, zero at init
  double alpha = 16.0;
  double dropout = 0.05;

  std::size_t input_dim() const { return base.cols(); }
  std::size_t rank() const { return adapter_down.rows(); }
  double scale() const { return alpha / static_cast<double>(rank()); }
  Matrix effective_weight() const;

  bool operator==(const ActorParams&) const = default;
};

struct CriticParams {
  Matrix hidden_w;  // H x D
  std::vector<double> hidden_b;
  std::vector<double> out_w;
  double out_b = 0.0;

  std::size_t input_dim() const { return hidden_w.cols(); }
  std::size_t hidden_dim() const { return hidden_w.rows(); }

  bool operator==(const CriticParams&) const = default;
};

inline constexpr int kCriticHidden = 32;

ActorParams init_actor(int input_dim, const ActorConfig& cfg, std::uint64_t seed);
CriticParams init_critic(int input_dim, int hidden, std::uint64_t seed);

// Log-probabilities. In train mode the adapter input passes through a seeded
// inverted-dropout mask. Throws Error(dimension_mismatch).
ActionScores actor_forward(const ActorParams& p, std::span<const double> state, bool train_mode,
                           std::uint64_t dropout_seed = 0);

double critic_forward(const CriticParams& p, std::span<const double> state);

ActionScores log_softmax(const ActionScores& logits);

// ---------------------------------------------------------------------------
// Losses and gradients

struct ActorSample {
  StateFeatures state;
  ActionId action = ActionId::cot;
  double logp_old = 0.0;
  double advantage = 0.0;
  std::uint64_t dropout_seed = 0;
};

struct CriticSample {
  StateFeatures state;
  double target = 0.0;
};

struct ActorLossConfig {
  double clip_eps = 0.2;
  double kl_coef = 0.1;
  bool train_mode = true;
};

struct ActorLossValue {
  double loss = 0.0;
  double clip_objective = 0.0;
  double kl = 0.0;
  std::vector<double> logp_new;
};

ActorLossValue evaluate_actor_loss(const ActorParams& p, std::span<const ActorSample> batch,
                                   const ActorLossConfig& cfg);
double evaluate_critic_loss(const CriticParams& p, std::span<const CriticSample> batch);

struct ActorGrad {
  Matrix adapter_down;
  Matrix adapter_up;
};

struct CriticGrad {
  Matrix hidden_w;
  std::vector<double> hidden_b;
  std::vector<double> out_w;
  double out_b = 0.0;
};

ActorGrad actor_loss_grad(const ActorParams& p, std::span<const ActorSample> batch, const ActorLossConfig& cfg);
CriticGrad critic_loss_grad(const CriticParams& p, std::span<const CriticSample> batch);

// Flat views over the trainable parameters (A then B; W1, b1, w2, b2).
std::vector<double> flatten_trainable(const ActorParams& p);
std::vector<double> flatten_trainable(const CriticParams& p);
void assign_trainable(ActorParams& p, std::span<const double> flat);
void assign_trainable(CriticParams& p, std::span<const double> flat);
std::vector<double> flatten(const ActorGrad& g);
std::vector<double> flatten(const CriticGrad& g);

enum class LossName { actor_total, critic_mse };

std::string_view to_string(LossName name);
LossName parse_loss_name(std::string_view text);  // throws Error(unknown_loss)

struct LossBatch {
  std::vector<ActorSample> actor;
  std::vector<CriticSample> critic;
  ActorLossConfig actor_cfg;
};

double loss_value(LossName name, const ActorParams& actor, const CriticParams& critic, const LossBatch& batch);

// Analytic gradient of the named loss, flattened like flatten_trainable.
// Throws Error(empty_batch).
std::vector<double> grad(LossName name, const ActorParams& actor, const CriticParams& critic, const LossBatch& batch);

using GradientFn =
    std::function<std::vector<double>(LossName, const ActorParams&, const CriticParams&, const LossBatch&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
};

// Central differences on n_coords randomly chosen coordinates (all of them if
// fewer exist). Relative error is |analytic - numeric| / max(1e-8, |numeric|).
// Throws Error(invalid_config) for h <= 0.
GradCheckResult grad_check(LossName name, const ActorParams& actor, const CriticParams& critic,
                           const LossBatch& batch, double h = 1e-5, std::size_t n_coords = 50,
                           std::uint64_t seed = 0, const GradientFn& analytic = grad);

// ---------------------------------------------------------------------------
// Checkpoints

struct CheckpointMeta {
  int train_qid_begin = 0;
  int train_qid_end = 0;  // exclusive; equal to begin for untrained params
  std::uint64_t world_seed = 0;
  int K = 5;
};

struct Checkpoint {
  ActorParams actor;
  CriticParams critic;
  std::uint64_t rng_state = 0;
  CheckpointMeta meta;
};

inline constexpr int kCheckpointSchemaVersion = 1;

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(std::string_view text);  // throws Error(schema_violation)

// Write-temp-then-rename. Throws Error(io_error).
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace spark
