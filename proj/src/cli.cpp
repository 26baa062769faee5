#include "spark/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spark/error.hpp"
#include "spark/eval_harness.hpp"
#include "spark/ppo_trainer.hpp"
#include "spark/rng.hpp"
#include "spark/rollout.hpp"
#include "spark/trajectory.hpp"

namespace spark::cli {

namespace fs = std::filesystem;

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::io_error: return kExitIo;
    case Errc::malformed_line:
    case Errc::schema_violation:
    case Errc::invalid_dataset: return kExitDataset;
    case Errc::non_finite_loss: return kExitNonFinite;
    default: return kExitConfig;
  }
}

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::io_error, "write failed for " + path.string());
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io_error, "cannot create output directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

// Every flag lands in one RunConfig key; unset flags leave the key alone.
struct Flags {
  std::string config;
  std::string profile = "reference";
  std::string out = "out";

  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> world_seed;
  std::optional<int> K;
  std::optional<double> difficulty;
  std::optional<double> sigma;
  std::optional<double> answer_threshold;

  std::optional<int> n_tasks;
  std::optional<std::string> mode;
  std::optional<double> threshold;
  bool filter_correct_only = false;

  std::optional<double> rho;
  std::optional<std::string> process_ok_sign;

  std::optional<int> rank;
  std::optional<double> alpha;
  std::optional<double> dropout;

  std::optional<double> lr;
  std::optional<double> clip_eps;
  std::optional<double> kl_coef;
  std::optional<double> target_kl;
  std::optional<int> batch_size;
  std::optional<int> epochs;

  std::optional<int> eval_tasks;

  std::optional<double> h;
  std::optional<int> n_coords;
  std::optional<double> tolerance;
};

RunConfig build_config(const Flags& f) {
  RunConfig cfg = profile_by_name(f.profile);
  if (!f.config.empty()) apply_config_file(cfg, f.config);
  apply_env(cfg);

  auto set = [](const auto& flag, auto& key) {
    if (flag) key = *flag;
  };
  set(f.seed, cfg.seed);
  set(f.world_seed, cfg.world.seed);
  set(f.K, cfg.world.K);
  set(f.difficulty, cfg.world.difficulty);
  set(f.sigma, cfg.world.sigma);
  set(f.answer_threshold, cfg.world.answer_threshold);
  set(f.n_tasks, cfg.generation.n_tasks);
  if (f.mode) cfg.generation.mode = parse_behavior_mode(*f.mode);
  set(f.threshold, cfg.generation.threshold);
  if (f.filter_correct_only) cfg.generation.filter_correct_only = true;
  set(f.rho, cfg.reward.rho);
  if (f.process_ok_sign) cfg.reward.process_ok_sign = parse_process_ok_sign(*f.process_ok_sign);
  set(f.rank, cfg.actor.rank);
  set(f.alpha, cfg.actor.alpha);
  set(f.dropout, cfg.actor.dropout);
  set(f.lr, cfg.trainer.lr);
  set(f.clip_eps, cfg.trainer.clip_eps);
  set(f.kl_coef, cfg.trainer.kl_coef);
  set(f.target_kl, cfg.trainer.target_kl);
  set(f.batch_size, cfg.trainer.batch_size);
  set(f.epochs, cfg.trainer.epochs);
  set(f.eval_tasks, cfg.eval.n_tasks);
  set(f.h, cfg.gradcheck.h);
  set(f.n_coords, cfg.gradcheck.n_coords);
  set(f.tolerance, cfg.gradcheck.tolerance);
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file (sections world, generation, reward, actor, trainer, eval, gradcheck)");
  sub->add_option("--profile", f.profile, "Base profile: reference or desk")->capture_default_str();
  sub->add_option("--out", f.out, "Output directory")->capture_default_str();
  sub->add_option("--seed", f.seed, "seed: run seed for judge noise, sampling, shuffles and init (env SPARK_SEED) [42]");
}

void add_world(CLI::App* sub, Flags& f) {
  sub->add_option("--world-seed", f.world_seed, "world.seed: hidden task distribution seed [42]");
  sub->add_option("--K", f.K, "world.K: steps per task [K=5]");
  sub->add_option("--difficulty", f.difficulty, "world.difficulty in [0,1] [0]");
  sub->add_option("--sigma", f.sigma, "world.sigma: judge noise amplitude [0.5]");
  sub->add_option("--answer-threshold", f.answer_threshold, "world.answer_threshold: correctness cutoff [0.5]");
}

void add_reward(CLI::App* sub, Flags& f) {
  sub->add_option("--rho", f.rho, "reward.rho: exploration-gap weight [0.5]");
  sub->add_option("--process-ok-sign", f.process_ok_sign, "reward.process_ok_sign: literal or flipped [literal]");
}

void add_actor(CLI::App* sub, Flags& f) {
  sub->add_option("--rank", f.rank, "actor.rank: adapter rank [r=8]");
  sub->add_option("--alpha", f.alpha, "actor.alpha: adapter scale [alpha=16]");
  sub->add_option("--dropout", f.dropout, "actor.dropout: adapter input dropout [dropout=0.05]");
}

void add_trainer(CLI::App* sub, Flags& f) {
  sub->add_option("--lr", f.lr, "trainer.lr: gradient step [1e-05; desk profile 0.1]");
  sub->add_option("--clip-eps", f.clip_eps, "trainer.clip_eps: PPO clip [epsilon=0.2]");
  sub->add_option("--kl-coef", f.kl_coef, "trainer.kl_coef: KL penalty weight [beta=0.1]");
  sub->add_option("--target-kl", f.target_kl, "trainer.target_kl: early-stop threshold [target KL=0.2]");
  sub->add_option("--batch-size", f.batch_size, "trainer.batch_size [batch=8]");
  sub->add_option("--epochs", f.epochs, "trainer.epochs [epochs=4]");
}

void print_stats(const StatsReport& s) {
  std::cout << "records " << s.records << ", trajectories " << s.trajectories << "\n";
  std::cout << "entropy " << fmt(s.entropy) << " nats (excluding cot " << fmt(s.entropy_excluding_cot) << ")\n";
  std::cout << "accuracy " << fmt(s.accuracy) << ", process_ok " << fmt(s.process_ok_fraction) << ", below best "
            << s.below_best << "\n";
  std::cout << "counts";
  for (std::size_t a = 0; a < kNumActions; ++a) std::cout << " " << kActionNames[a] << "=" << s.counts[a];
  std::cout << "\n";
}

int cmd_generate(const Flags& f) {
  const RunConfig cfg = build_config(f);
  const fs::path out = prepare_out(f.out);
  const Dataset d = generate_dataset(generation_config(cfg));
  write_dataset(d, out / "dataset.jsonl");
  const StatsReport s = dataset_stats(d);
  write_text(out / "stats.json", stats_to_json(s));
  write_text(out / "stats.csv", stats_to_csv(s));
  std::cout << "wrote " << (out / "dataset.jsonl").string() << " (" << d.records.size() << " records, "
            << d.meta.n_tasks << " of " << d.meta.raw_n_tasks << " tasks)\n";
  print_stats(s);
  return kExitOk;
}

int cmd_train(const Flags& f, const std::string& dataset_path) {
  const RunConfig cfg = build_config(f);
  const Dataset d = read_dataset(dataset_path);
  const fs::path out = prepare_out(f.out);

  const int D = feature_dim(d.meta.K);
  const ActorParams actor = init_actor(D, cfg.actor, cfg.seed);
  const CriticParams critic = init_critic(D, kCriticHidden, cfg.seed);
  const TrainResult res = train(d, actor, critic, trainer_config(cfg));

  Checkpoint ck{res.actor, res.critic, res.rng_state, {d.meta.qid_begin, d.meta.qid_end, d.meta.world_seed, d.meta.K}};
  save_checkpoint(ck, out / "checkpoint.json");
  std::string log;
  for (const auto& u : res.log.updates) log += update_record_to_json(u) + "\n";
  write_text(out / "train_log.jsonl", log);
  write_text(out / "train_summary.json", train_summary_to_json(res.log));

  std::cout << "trained " << res.log.epochs << " epochs, " << res.log.updates.size() << " batches, lr "
            << fmt(res.log.lr) << " (" << res.log.profile << " profile)\n";
  for (const auto& u : res.log.updates)
    if (u.early_stop)
      std::cout << "early stop: epoch " << u.epoch << " batch " << u.batch << " kl " << fmt(u.kl) << "\n";
  std::cout << "final actor loss " << fmt(res.log.final_actor_loss) << ", critic loss "
            << fmt(res.log.final_critic_loss) << "\n";
  std::cout << "wrote " << (out / "checkpoint.json").string() << "\n";
  return kExitOk;
}

// `name=path` loads a checkpoint; a bare `untrained` or `oracle` is built in.
Variant load_variant(const std::string& arg, const RunConfig& cfg, const EvalConfig& ec) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos) {
    if (arg == "untrained")
      return {arg, actor_policy(init_actor(feature_dim(cfg.world.K), cfg.actor, cfg.seed)), "untrained"};
    if (arg == "oracle") return {arg, oracle_policy(), "oracle"};
    throw Error(Errc::invalid_config, "variant '" + arg + "' must be name=checkpoint, untrained or oracle");
  }
  const std::string name = arg.substr(0, eq);
  const std::string path = arg.substr(eq + 1);
  if (name.empty() || path.empty()) throw Error(Errc::invalid_config, "variant '" + arg + "' needs name=checkpoint");
  const Checkpoint ck = load_checkpoint(path);
  if (ck.meta.K != cfg.world.K)
    throw Error(Errc::invalid_config, path + " was trained with K=" + std::to_string(ck.meta.K) + ", eval uses K=" +
                                          std::to_string(cfg.world.K));
  if (ck.actor.input_dim() != static_cast<std::size_t>(feature_dim(cfg.world.K)))
    throw Error(Errc::invalid_config, path + " has the wrong state width");
  check_qid_partition(ck.meta.train_qid_begin, ck.meta.train_qid_end, ec);
  return {name, actor_policy(ck.actor), path};
}

void write_report(const EvalReport& report, const fs::path& out) {
  write_text(out / "report.json", report_to_json(report));
  write_text(out / "report.csv", report_to_csv(report));
  write_text(out / "tool_dist.csv", tool_dist_to_csv(report));
}

void print_report(const EvalReport& report) {
  for (const auto& v : report.variants)
    std::cout << "#" << v.rank << " " << v.name << ": accuracy " << fmt(v.greedy_run.accuracy) << " ("
              << v.greedy_run.n_correct << "/" << v.greedy_run.n_tasks << "), entropy " << fmt(v.entropy)
              << " nats, sampled entropy " << fmt(v.sample_entropy) << " nats\n";
}

int cmd_eval(const Flags& f, const std::string& variant) {
  const RunConfig cfg = build_config(f);
  const EvalConfig ec = eval_config(cfg);
  std::string arg = variant;
  if (arg != "untrained" && arg != "oracle" && arg.find('=') == std::string::npos) arg = "policy=" + arg;
  const Variant v = load_variant(arg, cfg, ec);
  const fs::path out = prepare_out(f.out);
  const auto tasks = make_eval_tasks(ec);
  EvalReport report;
  report.n_eval_tasks = ec.n_tasks;
  report.K = ec.K;
  report.seed = ec.seed;
  report.world_seed = ec.world_seed;
  report.variants.push_back(evaluate_variant(v, tasks, ec));
  report.variants.back().rank = 1;
  write_report(report, out);
  print_report(report);
  return kExitOk;
}

int cmd_compare(const Flags& f, const std::vector<std::string>& specs) {
  const RunConfig cfg = build_config(f);
  const EvalConfig ec = eval_config(cfg);
  std::vector<Variant> variants;
  for (const auto& s : specs) variants.push_back(load_variant(s, cfg, ec));
  const fs::path out = prepare_out(f.out);
  const EvalReport report = compare(variants, ec);
  write_report(report, out);
  print_report(report);
  return kExitOk;
}

int cmd_validate(const std::string& dataset_path) {
  const Dataset d = read_dataset(dataset_path);
  const ValidationReport r = validate_dataset(d);
  for (const auto& issue : r.issues) std::cout << "issue: " << issue.message << "\n";
  std::cout << dataset_path << ": " << d.records.size() << " records, " << (r.ok() ? "valid" : "INVALID") << "\n";
  return r.ok() ? kExitOk : kExitDataset;
}

}  // namespace

GradcheckSetup make_gradcheck_setup(const RunConfig& cfg, std::uint64_t seed) {
  const int K = cfg.world.K;
  const int D = feature_dim(K);
  Rng rng(derive_seed({seed, 0x6763736574}));  // "gcset"

  GradcheckSetup g;
  g.actor = init_actor(D, cfg.actor, seed);
  // B = 0 would make every A-gradient vanish; start from a generic point.
  for (double& w : g.actor.adapter_up.data()) w = rng.uniform(-0.5, 0.5);
  g.critic = init_critic(D, kCriticHidden, seed);
  for (double& w : g.critic.hidden_b) w = rng.uniform(-0.5, 0.5);
  for (double& w : g.critic.out_w) w = rng.uniform(-0.5, 0.5);
  g.critic.out_b = rng.uniform(-0.5, 0.5);

  g.batch.actor_cfg = {cfg.trainer.clip_eps, cfg.trainer.kl_coef, true};
  for (int i = 0; i < cfg.gradcheck.batch_size; ++i) {
    const int step = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(K)));
    std::array<int, kNumActions> usage{};
    for (int j = 1; j < step; ++j) ++usage[rng.below(kNumActions)];
    const double prev = step == 1 ? 0.0 : rng.uniform(0.0, 10.0);
    const StateFeatures s =
        featurize({static_cast<int>(rng.below(kNumTaskTypes)), step, K, usage, prev, false});
    const ActionId action = action_at(rng.below(kNumActions));
    const std::uint64_t drop = rng.next();
    const double lp = actor_forward(g.actor, s, true, drop)[index_of(action)];
    g.batch.actor.push_back({s, action, lp + rng.uniform(-0.5, 0.5), rng.uniform(-2.0, 2.0), drop});
    g.batch.critic.push_back({s, rng.uniform(-1.0, 2.0)});
  }
  return g;
}

int run_gradcheck(const RunConfig& cfg, std::ostream& out, const GradientFn& analytic) {
  const GradcheckSetup g = make_gradcheck_setup(cfg, cfg.seed);
  bool ok = true;
  out << "h " << fmt(cfg.gradcheck.h) << ", tolerance " << fmt(cfg.gradcheck.tolerance) << "\n";
  for (LossName name : {LossName::actor_total, LossName::critic_mse}) {
    const GradCheckResult r = grad_check(name, g.actor, g.critic, g.batch, cfg.gradcheck.h,
                                         static_cast<std::size_t>(cfg.gradcheck.n_coords), cfg.seed, analytic);
    const bool pass = r.max_rel_error <= cfg.gradcheck.tolerance;
    ok = ok && pass;
    out << to_string(name) << ": max rel error " << fmt(r.max_rel_error) << " over " << r.coords_checked
        << " coords, worst index " << r.worst_index << " (analytic " << fmt(r.worst_analytic) << ", numeric "
        << fmt(r.worst_numeric) << ") " << (pass ? "PASS" : "FAIL") << "\n";
  }
  return ok ? kExitOk : kExitGradcheck;
}

int run(int argc, char** argv) {
  CLI::App app{"spark: rarity-first tool-use trajectories, offline PPO and evaluation"};
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 ok, 1 gradcheck failed, 2 config error, 3 I/O error, 4 invalid dataset, 5 non-finite loss.\n"
      "Reference defaults: epsilon=0.2, beta=0.1, target KL=0.2, batch=8, epochs=4, tau=6.0, K=5, r=8, alpha=16, "
      "dropout=0.05.");

  Flags f;
  std::string dataset;
  std::string checkpoint;
  std::vector<std::string> variants;

  auto* gen = app.add_subcommand("generate", "Roll out tasks under a behavior policy and write a JSONL dataset");
  add_common(gen, f);
  add_world(gen, f);
  gen->add_option("--n-tasks", f.n_tasks, "generation.n_tasks [2500; desk profile 100]");
  gen->add_option("--mode", f.mode, "generation.mode: rarity, greedy or random [rarity]");
  gen->add_option("--threshold", f.threshold, "generation.threshold: rarity pass mark [tau=6.0]");
  gen->add_flag("--filter-correct-only", f.filter_correct_only, "generation.filter_correct_only [false]");

  auto* tr = app.add_subcommand("train", "Offline PPO on a dataset; writes checkpoint.json and train logs");
  add_common(tr, f);
  tr->add_option("--dataset", dataset, "Dataset JSONL written by generate")->required();
  add_reward(tr, f);
  add_actor(tr, f);
  add_trainer(tr, f);

  auto* ev = app.add_subcommand("eval", "Evaluate one checkpoint (or untrained / oracle) on held-out tasks");
  add_common(ev, f);
  add_world(ev, f);
  add_actor(ev, f);
  ev->add_option("--checkpoint", checkpoint, "Checkpoint path, name=path, untrained or oracle")->required();
  ev->add_option("--eval-tasks", f.eval_tasks, "eval.n_tasks [840; desk profile 200]");

  auto* cmp = app.add_subcommand("compare", "Evaluate several variants on the same held-out tasks");
  add_common(cmp, f);
  add_world(cmp, f);
  add_actor(cmp, f);
  cmp->add_option("--variant", variants, "name=checkpoint, untrained or oracle (repeatable, at least two)")
      ->required();
  cmp->add_option("--eval-tasks", f.eval_tasks, "eval.n_tasks [840; desk profile 200]");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the actor and critic gradients");
  add_common(gc, f);
  add_actor(gc, f);
  gc->add_option("--fd-step", f.h, "gradcheck.h: central-difference step [1e-05]");
  gc->add_option("--n-coords", f.n_coords, "gradcheck.n_coords: coordinates per loss [50]");
  gc->add_option("--tolerance", f.tolerance, "gradcheck.tolerance: max relative error [0.0001]");

  auto* val = app.add_subcommand("validate", "Check a dataset's records and trajectory structure");
  val->add_option("--dataset", dataset, "Dataset JSONL")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_generate(f);
    if (tr->parsed()) return cmd_train(f, dataset);
    if (ev->parsed()) return cmd_eval(f, checkpoint);
    if (cmp->parsed()) return cmd_compare(f, variants);
    if (gc->parsed()) return run_gradcheck(build_config(f), std::cout);
    if (val->parsed()) return cmd_validate(dataset);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  }
  return kExitConfig;
}

}  // namespace spark::cli
