#pragma once

// Held-out evaluation of trained and baseline policies: accuracy via the
// judge's correctness rule, tool histograms and their Shannon entropy.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spark/actions.hpp"
#include "spark/policy_net.hpp"
#include "spark/task_world.hpp"

namespace spark {

enum class Decode { argmax, sample };

std::string_view to_string(Decode decode);
Decode parse_decode(std::string_view text);

struct EvalConfig {
  int n_tasks = 840;
  int K = 5;
  int qid_offset = 500000;  // eval qids never overlap training qids below this
  std::uint64_t world_seed = 42;
  double difficulty = 0.0;
  double answer_threshold = 0.5;
  double sigma = 0.5;
  std::uint64_t seed = 42;  // judge noise and sampling decode
};

std::vector<HiddenTask> make_eval_tasks(const EvalConfig& cfg);

// Throws Error(invalid_config) if [train_begin, train_end) intersects the
// eval qid range.
void check_qid_partition(int train_begin, int train_end, const EvalConfig& cfg);

// Scores over the nine actions for the current step; argmax decode picks the
// largest, sample decode draws from their softmax.
using PolicyFn = std::function<ActionScores(const HiddenTask& task, int step, std::span<const double> state)>;

PolicyFn actor_policy(ActorParams actor);
// Sees the hidden usefulness row; its argmax is the best action at each step.
PolicyFn oracle_policy();
PolicyFn uniform_policy();

struct PolicyRun {
  double accuracy = 0.0;
  long n_correct = 0;
  long n_tasks = 0;
  ActionCounts histogram{};
  std::vector<ActionCounts> per_step;
};

// Throws Error(empty_task_set).
PolicyRun run_policy(const PolicyFn& policy, std::span<const HiddenTask> tasks, Decode decode, std::uint64_t seed,
                     double sigma = 0.5);
PolicyRun run_policy(const ActorParams& actor, std::span<const HiddenTask> tasks, Decode decode, std::uint64_t seed,
                     double sigma = 0.5);

// Shannon entropy in nats. Throws Error(empty_histogram) when the total is 0.
double entropy(std::span<const long> counts);

struct Variant {
  std::string name;
  PolicyFn policy;
  std::string source;  // checkpoint path or built-in name
};

struct VariantResult {
  std::string name;
  std::string source;
  PolicyRun greedy_run;   // argmax decode
  PolicyRun sampled_run;  // sample decode
  double entropy = 0.0;         // of greedy_run.histogram
  double sample_entropy = 0.0;  // of sampled_run.histogram
  int rank = 0;                 // 1 = highest accuracy
};

struct EvalReport {
  std::vector<VariantResult> variants;  // in input order
  int n_eval_tasks = 0;
  int K = 0;
  std::uint64_t seed = 0;
  std::uint64_t world_seed = 0;
};

// Greedy and sampled runs of one variant on a fixed task set; rank is left 0.
VariantResult evaluate_variant(const Variant& variant, std::span<const HiddenTask> tasks, const EvalConfig& cfg);

// Throws Error(invalid_config) for fewer than two variants and
// Error(duplicate_variant_name).
EvalReport compare(std::span<const Variant> variants, const EvalConfig& cfg);

std::string report_to_json(const EvalReport& report);
// Header: rank,variant,accuracy,n_correct,n_tasks,entropy_nats,sample_entropy_nats,source
std::string report_to_csv(const EvalReport& report);
// Header: variant,step,action,count  (argmax decode)
std::string tool_dist_to_csv(const EvalReport& report);

}  // namespace spark
