#include "spark/ppo_trainer.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "spark/error.hpp"
#include "spark/rng.hpp"

namespace spark {

using ojson = nlohmann::ordered_json;

void TrainerConfig::validate() const {
  auto bad = [](const std::string& msg) { throw Error(Errc::invalid_config, msg); };
  if (!(lr >= 0.0) || !std::isfinite(lr)) bad("trainer.lr must be a finite value >= 0");
  if (!(clip_eps > 0.0)) bad("trainer.clip_eps must be > 0");
  if (!(kl_coef >= 0.0)) bad("trainer.kl_coef must be >= 0");
  if (!(target_kl > 0.0)) bad("trainer.target_kl must be > 0");
  if (batch_size < 1) bad("trainer.batch_size must be >= 1");
  if (epochs < 0) bad("trainer.epochs must be >= 0");
  if (!(reward.rho >= 0.0 && reward.rho <= 1.0)) bad("reward.rho must be in [0,1]");
}

std::vector<Transition> make_transitions(const Dataset& dataset, const RewardConfig& reward) {
  std::vector<Transition> out;
  out.reserve(dataset.records.size());
  for (const auto& r : dataset.records) {
    Transition t;
    t.state = r.state;
    t.action = r.action;
    t.reward = composite_reward(r.chosen_score, r.best_score, r.process_ok, reward);
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

void require_finite(double x, const char* what, int epoch, int batch) {
  if (!std::isfinite(x))
    throw Error(Errc::non_finite_loss, std::string(what) + " is not finite at epoch " + std::to_string(epoch) +
                                           ", batch " + std::to_string(batch));
}

void descend(std::span<double> params, std::span<const double> g, double lr) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * g[i];
}

}  // namespace

std::vector<UpdateRecord> run_epoch(int epoch, std::span<const Transition> ordered, ActorParams& actor,
                                    CriticParams& critic, const TrainerConfig& cfg) {
  cfg.validate();
  const ActorLossConfig train_cfg{cfg.clip_eps, cfg.kl_coef, true};
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  std::vector<UpdateRecord> records;
  bool actor_frozen = false;
  int batch_index = 0;
  for (std::size_t start = 0; start < ordered.size(); start += bs, ++batch_index) {
    const auto batch = ordered.subspan(start, std::min(bs, ordered.size() - start));

    std::vector<ActorSample> actor_batch;
    std::vector<CriticSample> critic_batch;
    actor_batch.reserve(batch.size());
    critic_batch.reserve(batch.size());
    for (const auto& t : batch) {
      actor_batch.push_back({t.state, t.action, t.logp_old, advantage(t.reward, t.v_old), t.dropout_seed});
      critic_batch.push_back({t.state, t.reward});
    }

    UpdateRecord rec;
    rec.epoch = epoch;
    rec.batch = batch_index;

    const auto before = evaluate_actor_loss(actor, actor_batch, train_cfg);
    rec.clip_objective = before.clip_objective;
    rec.actor_loss = before.loss;
    require_finite(rec.actor_loss, "actor loss", epoch, batch_index);

    if (!actor_frozen) {
      const ActorGrad g = actor_loss_grad(actor, actor_batch, train_cfg);
      descend(actor.adapter_down.data(), g.adapter_down.data(), cfg.lr);
      descend(actor.adapter_up.data(), g.adapter_up.data(), cfg.lr);
      rec.actor_updated = true;
    }

    std::vector<double> logp_new, logp_old;
    for (const auto& t : batch) {
      logp_new.push_back(actor_forward(actor, t.state, false)[index_of(t.action)]);
      logp_old.push_back(t.logp_old);
    }
    rec.kl = kl_penalty(logp_new, logp_old);
    require_finite(rec.kl, "approximate KL", epoch, batch_index);
    if (!actor_frozen && rec.kl > cfg.target_kl) {
      rec.early_stop = true;
      actor_frozen = true;
    }

    rec.critic_loss = evaluate_critic_loss(critic, critic_batch);
    require_finite(rec.critic_loss, "critic loss", epoch, batch_index);
    const CriticGrad cg = critic_loss_grad(critic, critic_batch);
    descend(critic.hidden_w.data(), cg.hidden_w.data(), cfg.lr);
    descend(critic.hidden_b, cg.hidden_b, cfg.lr);
    descend(critic.out_w, cg.out_w, cfg.lr);
    critic.out_b -= cfg.lr * cg.out_b;

    records.push_back(rec);
  }
  return records;
}

TrainResult train(const Dataset& dataset, ActorParams actor, CriticParams critic, const TrainerConfig& cfg) {
  cfg.validate();
  const auto report = validate_dataset(dataset);
  if (!report.ok())
    throw Error(Errc::invalid_dataset, "dataset failed validation: " + report.issues.front().message + " (" +
                                           std::to_string(report.issues.size()) + " issue(s))");
  for (const auto& r : dataset.records)
    if (r.state.size() != actor.input_dim() || r.state.size() != critic.input_dim())
      throw Error(Errc::invalid_dataset, "record " + r.qid + "/" + std::to_string(r.step) + " has state width " +
                                             std::to_string(r.state.size()) + ", networks expect " +
                                             std::to_string(actor.input_dim()));

  std::vector<Transition> base = make_transitions(dataset, cfg.reward);
  Rng rng(derive_seed({cfg.seed, 0x747261696e}));  // "train"

  TrainResult result;
  result.log.lr = cfg.lr;
  result.log.profile = cfg.profile;

  std::vector<std::size_t> order(base.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (auto& t : base) {
      t.logp_old = actor_forward(actor, t.state, false)[index_of(t.action)];
      t.v_old = critic_forward(critic, t.state);
    }
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    std::vector<Transition> ordered;
    ordered.reserve(base.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      Transition t = base[order[pos]];
      t.dropout_seed = derive_seed({cfg.seed, 0x64726f70, static_cast<std::uint64_t>(epoch), pos});
      ordered.push_back(std::move(t));
    }

    auto recs = run_epoch(epoch, ordered, actor, critic, cfg);
    for (const auto& r : recs) result.log.early_stops += r.early_stop ? 1 : 0;
    result.log.updates.insert(result.log.updates.end(), recs.begin(), recs.end());
    ++result.log.epochs;
  }
  if (!result.log.updates.empty()) {
    result.log.final_critic_loss = result.log.updates.back().critic_loss;
    result.log.final_actor_loss = result.log.updates.back().actor_loss;
  }
  result.actor = std::move(actor);
  result.critic = std::move(critic);
  result.rng_state = rng.state();
  return result;
}

std::string update_record_to_json(const UpdateRecord& rec) {
  ojson j;
  j["epoch"] = rec.epoch;
  j["batch"] = rec.batch;
  j["clip_objective"] = rec.clip_objective;
  j["actor_loss"] = rec.actor_loss;
  j["kl"] = rec.kl;
  j["critic_loss"] = rec.critic_loss;
  j["actor_updated"] = rec.actor_updated;
  j["early_stop"] = rec.early_stop;
  return j.dump();
}

std::string train_summary_to_json(const TrainLog& log) {
  ojson j;
  j["profile"] = log.profile;
  j["lr"] = log.lr;
  j["epochs"] = log.epochs;
  j["updates"] = log.updates.size();
  j["early_stops"] = log.early_stops;
  ojson epochs = ojson::array();
  for (const auto& r : log.updates)
    if (r.early_stop) epochs.push_back({{"epoch", r.epoch}, {"batch", r.batch}, {"kl", r.kl}});
  j["early_stop_events"] = epochs;
  j["final_actor_loss"] = log.final_actor_loss;
  j["final_critic_loss"] = log.final_critic_loss;
  return j.dump(2) + "\n";
}

}  // namespace spark
