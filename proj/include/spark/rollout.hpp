#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "spark/actions.hpp"
#include "spark/trajectory.hpp"

namespace spark {

enum class BehaviorMode { rarity, greedy, random };

std::string_view to_string(BehaviorMode mode);
BehaviorMode parse_behavior_mode(std::string_view text);  // throws Error(invalid_config)

struct GenerationConfig {
  int n_tasks = 2500;
  int K = 5;
  BehaviorMode mode = BehaviorMode::rarity;
  double threshold = 6.0;
  double sigma = 0.5;
  std::uint64_t seed = 42;        // judge noise and random-mode picks
  std::uint64_t world_seed = 42;  // hidden task distribution
  double difficulty = 0.0;
  double answer_threshold = 0.5;
  bool filter_correct_only = false;
  int qid_offset = 0;  // task indices are [qid_offset, qid_offset + n_tasks)

  void validate() const;  // throws Error(invalid_config)
};

// Rolls every task for K steps under the configured behavior policy.
Dataset generate_dataset(const GenerationConfig& cfg);

struct StatsReport {
  long records = 0;
  long trajectories = 0;
  ActionCounts counts{};
  std::vector<ActionCounts> per_step;  // index k-1
  ActionCounts counts_excluding_cot{};  // cot slot always 0
  double entropy = 0.0;                // nats, over all nine actions
  double entropy_excluding_cot = 0.0;
  double process_ok_fraction = 0.0;
  double accuracy = 0.0;  // fraction of final steps marked correct
  long below_best = 0;    // records with chosen_score < best_score
};

StatsReport dataset_stats(const Dataset& dataset);

std::string stats_to_json(const StatsReport& stats);
// Header: scope,step,action,count  (scope is "all" or "step").
std::string stats_to_csv(const StatsReport& stats);

}  // namespace spark
