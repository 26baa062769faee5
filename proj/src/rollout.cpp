#include "spark/rollout.hpp"

#include <numeric>

#include "json.hpp"
#include "spark/error.hpp"
#include "spark/eval_harness.hpp"
#include "spark/policy_net.hpp"
#include "spark/reward.hpp"
#include "spark/rng.hpp"
#include "spark/selection.hpp"
#include "spark/task_world.hpp"

namespace spark {

using ojson = nlohmann::ordered_json;

std::string_view to_string(BehaviorMode mode) {
  switch (mode) {
    case BehaviorMode::rarity: return "rarity";
    case BehaviorMode::greedy: return "greedy";
    case BehaviorMode::random: return "random";
  }
  return "rarity";
}

BehaviorMode parse_behavior_mode(std::string_view text) {
  if (text == "rarity") return BehaviorMode::rarity;
  if (text == "greedy") return BehaviorMode::greedy;
  if (text == "random") return BehaviorMode::random;
  throw Error(Errc::invalid_config, "mode must be rarity, greedy or random, got '" + std::string(text) + "'");
}

void GenerationConfig::validate() const {
  auto bad = [](const std::string& msg) { throw Error(Errc::invalid_config, msg); };
  if (n_tasks < 1) bad("generation.n_tasks must be >= 1");
  if (K < 1) bad("generation.K must be >= 1");
  if (!(threshold >= 0.0 && threshold <= 10.0)) bad("generation.threshold must be in [0,10]");
  if (!(sigma >= 0.0)) bad("world.sigma must be >= 0");
  if (!(difficulty >= 0.0 && difficulty <= 1.0)) bad("world.difficulty must be in [0,1]");
  if (qid_offset < 0) bad("qid offset must be >= 0");
}

Dataset generate_dataset(const GenerationConfig& cfg) {
  cfg.validate();
  const SelectionConfig selection{cfg.threshold};

  Dataset d;
  d.meta.K = cfg.K;
  d.meta.mode = std::string(to_string(cfg.mode));
  d.meta.seed = cfg.seed;
  d.meta.threshold = cfg.threshold;
  d.meta.raw_n_tasks = cfg.n_tasks;
  d.meta.filter_correct_only = cfg.filter_correct_only;
  d.meta.world_seed = cfg.world_seed;
  d.meta.difficulty = cfg.difficulty;
  d.meta.sigma = cfg.sigma;
  d.meta.qid_begin = cfg.qid_offset;
  d.meta.qid_end = cfg.qid_offset + cfg.n_tasks;
  d.records.reserve(static_cast<std::size_t>(cfg.n_tasks) * static_cast<std::size_t>(cfg.K));

  int retained = 0;
  std::vector<StepRecord> trajectory;
  std::vector<ActionId> actions;
  for (int i = 0; i < cfg.n_tasks; ++i) {
    const std::string qid = format_qid(cfg.qid_offset + i);
    const HiddenTask task = sample_task(cfg.world_seed, qid, cfg.K, cfg.difficulty, cfg.answer_threshold);
    UsageCounter usage;
    double prev_score = 0.0;
    trajectory.clear();
    actions.clear();

    for (int k = 1; k <= cfg.K; ++k) {
      const Observation obs{task.task_type, k, cfg.K, usage.counts(), prev_score, false};
      const JudgeScores js = score_candidates(task, k, cfg.seed, cfg.sigma);

      ActionId action = ActionId::cot;
      switch (cfg.mode) {
        case BehaviorMode::rarity: action = select_rarity_first(js, usage, selection); break;
        case BehaviorMode::greedy: action = select_greedy(js); break;
        case BehaviorMode::random:
          action = select_random(derive_seed({cfg.seed, hash_string(qid), static_cast<std::uint64_t>(k)}));
          break;
      }

      StepRecord rec;
      rec.qid = qid;
      rec.step = k;
      rec.state = featurize(obs);
      rec.action = action;
      rec.scores = js.scores;
      rec.chosen_score = js.scores[index_of(action)];
      rec.best_score = js.best_score;
      rec.process_ok = assess_process_ok(task, k, action);
      rec.reward_raw = raw_reward(rec.chosen_score);

      usage.record(action);
      actions.push_back(action);
      prev_score = rec.chosen_score;
      const bool last = k == cfg.K;
      rec.next_state = featurize(Observation{task.task_type, last ? cfg.K : k + 1, cfg.K, usage.counts(), prev_score, last});
      rec.is_final = last;
      trajectory.push_back(std::move(rec));
    }

    const bool correct = judge_correct(task, actions);
    trajectory.back().correct = correct;
    if (cfg.filter_correct_only && !correct) continue;
    ++retained;
    d.records.insert(d.records.end(), std::make_move_iterator(trajectory.begin()),
                     std::make_move_iterator(trajectory.end()));
  }
  d.meta.n_tasks = retained;
  return d;
}

StatsReport dataset_stats(const Dataset& d) {
  StatsReport s;
  s.per_step.assign(static_cast<std::size_t>(std::max(d.meta.K, 1)), ActionCounts{});
  long ok = 0, finals = 0, correct = 0;
  for (const auto& r : d.records) {
    ++s.records;
    const std::size_t a = index_of(r.action);
    ++s.counts[a];
    if (r.step >= 1 && static_cast<std::size_t>(r.step) <= s.per_step.size())
      ++s.per_step[static_cast<std::size_t>(r.step - 1)][a];
    if (r.action != ActionId::cot) ++s.counts_excluding_cot[a];
    if (r.process_ok) ++ok;
    if (r.chosen_score < r.best_score) ++s.below_best;
    if (r.is_final) {
      ++finals;
      if (r.correct.value_or(false)) ++correct;
    }
  }
  s.trajectories = finals;
  if (s.records > 0) {
    s.entropy = entropy(s.counts);
    s.process_ok_fraction = static_cast<double>(ok) / static_cast<double>(s.records);
  }
  if (std::accumulate(s.counts_excluding_cot.begin(), s.counts_excluding_cot.end(), 0L) > 0)
    s.entropy_excluding_cot = entropy(s.counts_excluding_cot);
  if (finals > 0) s.accuracy = static_cast<double>(correct) / static_cast<double>(finals);
  return s;
}

std::string stats_to_json(const StatsReport& s) {
  auto named = [](const ActionCounts& c) {
    ojson o;
    for (std::size_t a = 0; a < kNumActions; ++a) o[std::string(kActionNames[a])] = c[a];
    return o;
  };
  ojson j;
  j["records"] = s.records;
  j["trajectories"] = s.trajectories;
  j["counts"] = named(s.counts);
  ojson no_cot;
  for (std::size_t a = 0; a < kNumTools; ++a) no_cot[std::string(kActionNames[a])] = s.counts_excluding_cot[a];
  j["counts_excluding_cot"] = no_cot;
  ojson steps = ojson::array();
  for (const auto& c : s.per_step) steps.push_back(named(c));
  j["per_step"] = steps;
  j["entropy_nats"] = s.entropy;
  j["entropy_excluding_cot_nats"] = s.entropy_excluding_cot;
  j["process_ok_fraction"] = s.process_ok_fraction;
  j["accuracy"] = s.accuracy;
  j["below_best"] = s.below_best;
  return j.dump(2) + "\n";
}

std::string stats_to_csv(const StatsReport& s) {
  std::string out = "scope,step,action,count\n";
  for (std::size_t a = 0; a < kNumActions; ++a)
    out += "all,0," + std::string(kActionNames[a]) + "," + std::to_string(s.counts[a]) + "\n";
  for (std::size_t k = 0; k < s.per_step.size(); ++k)
    for (std::size_t a = 0; a < kNumActions; ++a)
      out += "step," + std::to_string(k + 1) + "," + std::string(kActionNames[a]) + "," +
             std::to_string(s.per_step[k][a]) + "\n";
  return out;
}

}  // namespace spark
