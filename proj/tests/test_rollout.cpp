#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "spark/error.hpp"
#include "spark/eval_harness.hpp"
#include "spark/rollout.hpp"
#include "spark/selection.hpp"
#include "spark/task_world.hpp"

using namespace spark;

namespace {

GenerationConfig gen(int n, BehaviorMode mode, std::uint64_t seed = 42) {
  GenerationConfig g;
  g.n_tasks = n;
  g.mode = mode;
  g.seed = seed;
  return g;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("100 tasks of 5 steps give 500 valid records") {
  const Dataset d = generate_dataset(gen(100, BehaviorMode::rarity));
  CHECK(d.records.size() == 500);
  CHECK(validate_dataset(d).ok());
  CHECK(d.meta.n_tasks == 100);
  CHECK(d.meta.raw_n_tasks == 100);
  CHECK(d.meta.qid_begin == 0);
  CHECK(d.meta.qid_end == 100);
}

TEST_CASE("record count is n_tasks * K before filtering") {
  for (int K : {1, 3, 5, 7}) {
    for (int n : {1, 25, 250}) {
      GenerationConfig g = gen(n, BehaviorMode::rarity);
      g.K = K;
      const Dataset d = generate_dataset(g);
      CHECK(d.records.size() == static_cast<std::size_t>(n * K));
      CHECK(validate_dataset(d).ok());
    }
  }
}

TEST_CASE("greedy mode always executes the best action") {
  const Dataset one = generate_dataset(gen(1, BehaviorMode::greedy));
  REQUIRE(one.records.size() == 5);
  for (const auto& r : one.records) CHECK(r.chosen_score == r.best_score);
  const Dataset many = generate_dataset(gen(200, BehaviorMode::greedy));
  for (const auto& r : many.records) CHECK(r.chosen_score == r.best_score);
}

TEST_CASE("rarity mode respects the threshold and sometimes explores below the best") {
  const Dataset d = generate_dataset(gen(100, BehaviorMode::rarity));
  long below = 0;
  for (const auto& r : d.records) {
    CHECK(r.chosen_score <= r.best_score);
    if (r.action != ActionId::cot) CHECK(r.chosen_score >= 6.0);
    below += r.chosen_score < r.best_score ? 1 : 0;
  }
  CHECK(below > 0);
  CHECK(dataset_stats(d).below_best == below);
}

TEST_CASE("rarity records replay the selection rule") {
  const GenerationConfig g = gen(30, BehaviorMode::rarity);
  const Dataset d = generate_dataset(g);
  UsageCounter usage;
  std::string qid;
  for (const auto& r : d.records) {
    if (r.qid != qid) {
      usage = UsageCounter{};
      qid = r.qid;
    }
    const HiddenTask t = sample_task(g.world_seed, r.qid, g.K, g.difficulty, g.answer_threshold);
    const JudgeScores j = score_candidates(t, r.step, g.seed, g.sigma);
    CHECK(j.scores == r.scores);
    CHECK(select_rarity_first(j, usage, {g.threshold}) == r.action);
    CHECK(assess_process_ok(t, r.step, r.action) == r.process_ok);
    usage.record(r.action);
  }
}

TEST_CASE("rarity entropy exceeds greedy entropy on the same seed") {
  const auto rarity = dataset_stats(generate_dataset(gen(100, BehaviorMode::rarity)));
  const auto greedy = dataset_stats(generate_dataset(gen(100, BehaviorMode::greedy)));
  MESSAGE("rarity H=" << rarity.entropy << " greedy H=" << greedy.entropy);
  CHECK(rarity.entropy > greedy.entropy);
}

TEST_CASE("random mode is close to uniform") {
  const auto s = dataset_stats(generate_dataset(gen(2000, BehaviorMode::random)));
  CHECK(s.entropy == doctest::Approx(std::log(9.0)).epsilon(0.01));
}

TEST_CASE("stats of hand-built datasets") {
  Dataset all_cot = generate_dataset(gen(4, BehaviorMode::greedy));
  for (auto& r : all_cot.records) {
    r.action = ActionId::cot;
    r.scores[index_of(ActionId::cot)] = 10.0;
    r.chosen_score = r.best_score = r.reward_raw = 10.0;
  }
  const auto s = dataset_stats(all_cot);
  CHECK(s.entropy == 0.0);
  long non_cot = 0;
  for (long c : s.counts_excluding_cot) non_cot += c;
  CHECK(non_cot == 0);
  CHECK(s.counts[index_of(ActionId::cot)] == 20);

  Dataset uniform = generate_dataset(gen(9, BehaviorMode::greedy));
  for (std::size_t i = 0; i < uniform.records.size(); ++i) {
    auto& r = uniform.records[i];
    r.action = action_at(i % 9);
    r.chosen_score = r.reward_raw = r.scores[i % 9];
  }
  CHECK(dataset_stats(uniform).entropy == doctest::Approx(std::log(9.0)).epsilon(1e-12));
}

TEST_CASE("stats counts are consistent") {
  const Dataset d = generate_dataset(gen(50, BehaviorMode::rarity));
  const auto s = dataset_stats(d);
  long total = 0;
  for (long c : s.counts) total += c;
  CHECK(total == 250);
  CHECK(s.records == 250);
  CHECK(s.trajectories == 50);
  REQUIRE(s.per_step.size() == 5);
  for (std::size_t a = 0; a < kNumActions; ++a) {
    long per = 0;
    for (const auto& step : s.per_step) per += step[a];
    CHECK(per == s.counts[a]);
  }
  CHECK(s.counts_excluding_cot[index_of(ActionId::cot)] == 0);
  CHECK(s.accuracy >= 0.0);
  CHECK(s.accuracy <= 1.0);
  const std::string csv = stats_to_csv(s);
  CHECK(csv.rfind("scope,step,action,count\n", 0) == 0);
}

TEST_CASE("output is byte-identical across seeded runs") {
  const auto dir = std::filesystem::temp_directory_path() / "spark_test_rollout";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_dataset(generate_dataset(gen(100, BehaviorMode::rarity)), dir / "a.jsonl");
  write_dataset(generate_dataset(gen(100, BehaviorMode::rarity)), dir / "b.jsonl");
  write_dataset(generate_dataset(gen(100, BehaviorMode::rarity, 43)), dir / "c.jsonl");
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  CHECK(slurp(dir / "a.meta.json") == slurp(dir / "b.meta.json"));
  CHECK(slurp(dir / "a.jsonl") != slurp(dir / "c.jsonl"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("filtering keeps only correct trajectories and records both counts") {
  GenerationConfig g = gen(200, BehaviorMode::rarity);
  const Dataset all = generate_dataset(g);
  g.filter_correct_only = true;
  const Dataset kept = generate_dataset(g);
  long correct = 0;
  for (const auto& r : all.records) correct += (r.is_final && *r.correct) ? 1 : 0;
  CHECK(kept.meta.raw_n_tasks == 200);
  CHECK(kept.meta.n_tasks == correct);
  CHECK(kept.records.size() == static_cast<std::size_t>(correct * 5));
  CHECK(validate_dataset(kept).ok());
  for (const auto& r : kept.records)
    if (r.is_final) CHECK(*r.correct);
}

TEST_CASE("the 2500 x 5 relation holds at scaled counts") {
  for (int n : {25, 250, 2500}) {
    const Dataset d = generate_dataset(gen(n, BehaviorMode::rarity));
    CHECK(d.records.size() == static_cast<std::size_t>(5 * n));
  }
}

TEST_CASE("invalid generation configs") {
  GenerationConfig g = gen(0, BehaviorMode::rarity);
  CHECK_THROWS_AS(generate_dataset(g), Error);
  g = gen(5, BehaviorMode::rarity);
  g.K = 0;
  CHECK_THROWS_AS(generate_dataset(g), Error);
  g = gen(5, BehaviorMode::rarity);
  g.threshold = 11.0;
  CHECK_THROWS_AS(generate_dataset(g), Error);
  CHECK_THROWS_AS(parse_behavior_mode("softmax"), Error);
}

TEST_CASE("generated qids never overlap the default eval range") {
  const Dataset d = generate_dataset(gen(100, BehaviorMode::rarity));
  CHECK_NOTHROW(check_qid_partition(d.meta.qid_begin, d.meta.qid_end, EvalConfig{}));
  CHECK_THROWS_AS(check_qid_partition(0, 500001, EvalConfig{}), Error);
}
