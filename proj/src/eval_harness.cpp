#include "spark/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "json.hpp"
#include "spark/error.hpp"
#include "spark/rng.hpp"
#include "spark/trajectory.hpp"

namespace spark {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Decode decode) { return decode == Decode::argmax ? "argmax" : "sample"; }

Decode parse_decode(std::string_view text) {
  if (text == "argmax") return Decode::argmax;
  if (text == "sample") return Decode::sample;
  throw Error(Errc::invalid_config, "decode must be argmax or sample, got '" + std::string(text) + "'");
}

std::vector<HiddenTask> make_eval_tasks(const EvalConfig& cfg) {
  if (cfg.n_tasks < 1) throw Error(Errc::invalid_config, "eval.n_tasks must be >= 1");
  std::vector<HiddenTask> tasks;
  tasks.reserve(static_cast<std::size_t>(cfg.n_tasks));
  for (int i = 0; i < cfg.n_tasks; ++i)
    tasks.push_back(sample_task(cfg.world_seed, format_qid(cfg.qid_offset + i), cfg.K, cfg.difficulty,
                                cfg.answer_threshold));
  return tasks;
}

void check_qid_partition(int train_begin, int train_end, const EvalConfig& cfg) {
  const int eval_begin = cfg.qid_offset;
  const int eval_end = cfg.qid_offset + cfg.n_tasks;
  if (train_begin < train_end && train_begin < eval_end && eval_begin < train_end)
    throw Error(Errc::invalid_config, "training qids [" + std::to_string(train_begin) + ", " +
                                          std::to_string(train_end) + ") overlap eval qids [" +
                                          std::to_string(eval_begin) + ", " + std::to_string(eval_end) + ")");
}

PolicyFn actor_policy(ActorParams actor) {
  return [actor = std::move(actor)](const HiddenTask&, int, std::span<const double> state) {
    return actor_forward(actor, state, false);
  };
}

PolicyFn oracle_policy() {
  return [](const HiddenTask& task, int step, std::span<const double>) { return task.row(step); };
}

PolicyFn uniform_policy() {
  return [](const HiddenTask&, int, std::span<const double>) { return ActionScores{}; };
}

namespace {

std::size_t argmax(const ActionScores& s) {
  return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

std::size_t sample_softmax(const ActionScores& s, Rng& rng) {
  const ActionScores logp = log_softmax(s);
  double u = rng.uniform();
  for (std::size_t a = 0; a < kNumActions; ++a) {
    u -= std::exp(logp[a]);
    if (u < 0.0) return a;
  }
  return kNumActions - 1;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

}  // namespace

PolicyRun run_policy(const PolicyFn& policy, std::span<const HiddenTask> tasks, Decode decode, std::uint64_t seed,
                     double sigma) {
  if (tasks.empty()) throw Error(Errc::empty_task_set, "no tasks to evaluate");
  PolicyRun run;
  run.per_step.assign(static_cast<std::size_t>(tasks.front().K), ActionCounts{});
  std::vector<ActionId> actions;

  for (const auto& task : tasks) {
    if (static_cast<std::size_t>(task.K) > run.per_step.size())
      run.per_step.resize(static_cast<std::size_t>(task.K), ActionCounts{});
    std::array<int, kNumActions> usage{};
    double prev_score = 0.0;
    actions.clear();
    for (int k = 1; k <= task.K; ++k) {
      const StateFeatures s = featurize({task.task_type, k, task.K, usage, prev_score, false});
      const ActionScores scores = policy(task, k, s);
      std::size_t a;
      if (decode == Decode::argmax) {
        a = argmax(scores);
      } else {
        Rng rng(derive_seed({seed, 0x73616d706c65, hash_string(task.qid), static_cast<std::uint64_t>(k)}));
        a = sample_softmax(scores, rng);
      }
      const ActionId action = action_at(a);
      ++run.histogram[a];
      ++run.per_step[static_cast<std::size_t>(k - 1)][a];
      ++usage[a];
      prev_score = score_candidates(task, k, seed, sigma).scores[a];
      actions.push_back(action);
    }
    if (judge_correct(task, actions)) ++run.n_correct;
    ++run.n_tasks;
  }
  run.accuracy = static_cast<double>(run.n_correct) / static_cast<double>(run.n_tasks);
  return run;
}

PolicyRun run_policy(const ActorParams& actor, std::span<const HiddenTask> tasks, Decode decode, std::uint64_t seed,
                     double sigma) {
  return run_policy(actor_policy(actor), tasks, decode, seed, sigma);
}

double entropy(std::span<const long> counts) {
  const long total = std::accumulate(counts.begin(), counts.end(), 0L);
  if (total <= 0) throw Error(Errc::empty_histogram, "histogram has no mass");
  double h = 0.0;
  for (long c : counts) {
    if (c <= 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

VariantResult evaluate_variant(const Variant& variant, std::span<const HiddenTask> tasks, const EvalConfig& cfg) {
  VariantResult r;
  r.name = variant.name;
  r.source = variant.source;
  r.greedy_run = run_policy(variant.policy, tasks, Decode::argmax, cfg.seed, cfg.sigma);
  r.sampled_run = run_policy(variant.policy, tasks, Decode::sample, cfg.seed, cfg.sigma);
  r.entropy = entropy(r.greedy_run.histogram);
  r.sample_entropy = entropy(r.sampled_run.histogram);
  return r;
}

EvalReport compare(std::span<const Variant> variants, const EvalConfig& cfg) {
  if (variants.size() < 2) throw Error(Errc::invalid_config, "compare needs at least two variants");
  std::set<std::string> names;
  for (const auto& v : variants)
    if (!names.insert(v.name).second) throw Error(Errc::duplicate_variant_name, "variant '" + v.name + "' repeated");

  const auto tasks = make_eval_tasks(cfg);
  EvalReport report;
  report.n_eval_tasks = cfg.n_tasks;
  report.K = cfg.K;
  report.seed = cfg.seed;
  report.world_seed = cfg.world_seed;
  for (const auto& v : variants) report.variants.push_back(evaluate_variant(v, tasks, cfg));

  std::vector<std::size_t> order(report.variants.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.variants[a].greedy_run.accuracy > report.variants[b].greedy_run.accuracy;
  });
  for (std::size_t i = 0; i < order.size(); ++i) report.variants[order[i]].rank = static_cast<int>(i + 1);
  return report;
}

std::string report_to_json(const EvalReport& report) {
  auto named = [](const ActionCounts& c) {
    ojson o;
    for (std::size_t a = 0; a < kNumActions; ++a) o[std::string(kActionNames[a])] = c[a];
    return o;
  };
  ojson j;
  j["n_eval_tasks"] = report.n_eval_tasks;
  j["K"] = report.K;
  j["seed"] = report.seed;
  j["world_seed"] = report.world_seed;
  ojson vars = ojson::array();
  for (const auto& v : report.variants) {
    ojson vj;
    vj["name"] = v.name;
    vj["source"] = v.source;
    vj["rank"] = v.rank;
    vj["accuracy"] = v.greedy_run.accuracy;
    vj["n_correct"] = v.greedy_run.n_correct;
    vj["histogram"] = named(v.greedy_run.histogram);
    vj["entropy_nats"] = v.entropy;
    ojson steps = ojson::array();
    for (const auto& c : v.greedy_run.per_step) steps.push_back(named(c));
    vj["per_step"] = steps;
    vj["sample_accuracy"] = v.sampled_run.accuracy;
    vj["sample_histogram"] = named(v.sampled_run.histogram);
    vj["sample_entropy_nats"] = v.sample_entropy;
    vars.push_back(vj);
  }
  j["variants"] = vars;
  return j.dump(2) + "\n";
}

std::string report_to_csv(const EvalReport& report) {
  std::string out = "rank,variant,accuracy,n_correct,n_tasks,entropy_nats,sample_entropy_nats,source\n";
  for (const auto& v : report.variants)
    out += std::to_string(v.rank) + "," + v.name + "," + fmt(v.greedy_run.accuracy) + "," +
           std::to_string(v.greedy_run.n_correct) + "," + std::to_string(v.greedy_run.n_tasks) + "," +
           fmt(v.entropy) + "," + fmt(v.sample_entropy) + "," + v.source + "\n";
  return out;
}

std::string tool_dist_to_csv(const EvalReport& report) {
  std::string out = "variant,step,action,count\n";
  for (const auto& v : report.variants)
    for (std::size_t k = 0; k < v.greedy_run.per_step.size(); ++k)
      for (std::size_t a = 0; a < kNumActions; ++a)
        out += v.name + "," + std::to_string(k + 1) + "," + std::string(kActionNames[a]) + "," +
               std::to_string(v.greedy_run.per_step[k][a]) + "\n";
  return out;
}

}  // namespace spark
