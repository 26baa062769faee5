#include "spark/policy_net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "spark/error.hpp"
#include "spark/ppo_math.hpp"
#include "spark/rng.hpp"
#include "spark/task_world.hpp"

namespace spark {

using ojson = nlohmann::ordered_json;

int feature_dim(int K) { return kNumTaskTypes + K + static_cast<int>(kNumActions) + 2; }

StateFeatures featurize(const Observation& obs) {
  auto bad = [](const std::string& msg) { throw Error(Errc::invalid_observation, msg); };
  if (obs.K < 1) bad("K must be >= 1");
  if (obs.task_type < 0 || obs.task_type >= kNumTaskTypes) bad("task_type out of range");
  if (obs.step < 1 || obs.step > obs.K) bad("step " + std::to_string(obs.step) + " outside 1..K");
  if (!(obs.prev_chosen_score >= 0.0 && obs.prev_chosen_score <= 10.0)) bad("prev_chosen_score outside [0,10]");
  int used = 0;
  for (int c : obs.usage) {
    if (c < 0) bad("negative usage count");
    used += c;
  }
  const int budget = obs.terminal ? obs.K : obs.step - 1;
  if (used > budget) bad("usage counts exceed the number of previous steps");

  StateFeatures s(static_cast<std::size_t>(feature_dim(obs.K)), 0.0);
  std::size_t off = 0;
  s[off + static_cast<std::size_t>(obs.task_type)] = 1.0;
  off += kNumTaskTypes;
  s[off + static_cast<std::size_t>(obs.step - 1)] = 1.0;
  off += static_cast<std::size_t>(obs.K);
  const double denom = std::max(1, budget);
  for (std::size_t a = 0; a < kNumActions; ++a) s[off + a] = obs.usage[a] / denom;
  off += kNumActions;
  s[off++] = obs.prev_chosen_score / 10.0;
  s[off] = 1.0;
  return s;
}

Matrix ActorParams::effective_weight() const {
  Matrix w = base;
  const double c = scale();
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < rank(); ++k) acc += adapter_up(i, k) * adapter_down(k, j);
      w(i, j) += c * acc;
    }
  return w;
}

ActorParams init_actor(int input_dim, const ActorConfig& cfg, std::uint64_t seed) {
  if (input_dim < 1 || cfg.rank < 1) throw Error(Errc::invalid_config, "actor dimensions must be positive");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw Error(Errc::invalid_config, "dropout must be in [0,1)");
  const auto D = static_cast<std::size_t>(input_dim);
  const auto r = static_cast<std::size_t>(cfg.rank);

  Rng rng(derive_seed({seed, 0x6163746f72}));  // "actor"
  ActorParams p;
  p.alpha = cfg.alpha;
  p.dropout = cfg.dropout;
  p.base = Matrix(kNumActions, D);
  for (double& w : p.base.data()) w = rng.uniform(-cfg.base_scale, cfg.base_scale);
  p.adapter_down = Matrix(r, D);
  const double bound = 1.0 / std::sqrt(static_cast<double>(D));
  for (double& w : p.adapter_down.data()) w = rng.uniform(-bound, bound);
  p.adapter_up = Matrix(kNumActions, r, 0.0);
  return p;
}

CriticParams init_critic(int input_dim, int hidden, std::uint64_t seed) {
  if (input_dim < 1 || hidden < 1) throw Error(Errc::invalid_config, "critic dimensions must be positive");
  const auto D = static_cast<std::size_t>(input_dim);
  const auto H = static_cast<std::size_t>(hidden);

  Rng rng(derive_seed({seed, 0x637269746963}));  // "critic"
  CriticParams p;
  p.hidden_w = Matrix(H, D);
  const double bound = 1.0 / std::sqrt(static_cast<double>(D));
  for (double& w : p.hidden_w.data()) w = rng.uniform(-bound, bound);
  p.hidden_b.assign(H, 0.0);
  p.out_w.assign(H, 0.0);  // V = 0 everywhere until the head is trained
  p.out_b = 0.0;
  return p;
}

ActionScores log_softmax(const ActionScores& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - m);
  const double lse = m + std::log(sum);
  ActionScores out;
  for (std::size_t i = 0; i < kNumActions; ++i) out[i] = logits[i] - lse;
  return out;
}

namespace {

struct ActorPass {
  std::vector<double> adapter_in;  // dropout-masked state
  std::vector<double> hidden;      // A * adapter_in
  ActionScores logp{};
};

std::vector<double> dropout_mask(std::size_t n, double p, std::uint64_t seed) {
  std::vector<double> mask(n, 1.0);
  if (p <= 0.0) return mask;
  Rng rng(derive_seed({seed, 0x64726f70}));  // "drop"
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& m : mask) m = rng.uniform() < p ? 0.0 : keep_scale;
  return mask;
}

ActorPass actor_pass(const ActorParams& p, std::span<const double> s, bool train_mode, std::uint64_t dropout_seed) {
  const std::size_t D = p.input_dim();
  if (s.size() != D)
    throw Error(Errc::dimension_mismatch, "state has " + std::to_string(s.size()) + " entries, actor expects " +
                                              std::to_string(D));
  ActorPass out;
  out.adapter_in.assign(s.begin(), s.end());
  if (train_mode) {
    const auto mask = dropout_mask(D, p.dropout, dropout_seed);
    for (std::size_t j = 0; j < D; ++j) out.adapter_in[j] *= mask[j];
  }
  const std::size_t r = p.rank();
  out.hidden.assign(r, 0.0);
  for (std::size_t k = 0; k < r; ++k)
    for (std::size_t j = 0; j < D; ++j) out.hidden[k] += p.adapter_down(k, j) * out.adapter_in[j];

  ActionScores logits{};
  const double c = p.scale();
  for (std::size_t i = 0; i < kNumActions; ++i) {
    double base = 0.0;
    for (std::size_t j = 0; j < D; ++j) base += p.base(i, j) * s[j];
    double lora = 0.0;
    for (std::size_t k = 0; k < r; ++k) lora += p.adapter_up(i, k) * out.hidden[k];
    logits[i] = base + c * lora;
  }
  out.logp = log_softmax(logits);
  return out;
}

struct CriticPass {
  std::vector<double> act;
  double value = 0.0;
};

CriticPass critic_pass(const CriticParams& p, std::span<const double> s) {
  const std::size_t D = p.input_dim();
  if (s.size() != D)
    throw Error(Errc::dimension_mismatch, "state has " + std::to_string(s.size()) + " entries, critic expects " +
                                              std::to_string(D));
  CriticPass out;
  const std::size_t H = p.hidden_dim();
  out.act.resize(H);
  out.value = p.out_b;
  for (std::size_t h = 0; h < H; ++h) {
    double z = p.hidden_b[h];
    for (std::size_t j = 0; j < D; ++j) z += p.hidden_w(h, j) * s[j];
    out.act[h] = std::tanh(z);
    out.value += p.out_w[h] * out.act[h];
  }
  return out;
}

}  // namespace

ActionScores actor_forward(const ActorParams& p, std::span<const double> state, bool train_mode,
                           std::uint64_t dropout_seed) {
  return actor_pass(p, state, train_mode, dropout_seed).logp;
}

double critic_forward(const CriticParams& p, std::span<const double> state) { return critic_pass(p, state).value; }

ActorLossValue evaluate_actor_loss(const ActorParams& p, std::span<const ActorSample> batch,
                                   const ActorLossConfig& cfg) {
  if (batch.empty()) throw Error(Errc::empty_batch, "actor batch is empty");
  std::vector<SurrogateTerm> terms;
  terms.reserve(batch.size());
  ActorLossValue out;
  for (const auto& smp : batch) {
    const auto logp = actor_pass(p, smp.state, cfg.train_mode, smp.dropout_seed).logp;
    const double lp = logp[index_of(smp.action)];
    terms.push_back({lp, smp.logp_old, smp.advantage});
    out.logp_new.push_back(lp);
  }
  std::vector<double> old;
  old.reserve(batch.size());
  for (const auto& smp : batch) old.push_back(smp.logp_old);
  out.clip_objective = mean_clip_objective(terms, cfg.clip_eps);
  out.kl = kl_penalty(out.logp_new, old);
  out.loss = actor_loss(terms, cfg.clip_eps, cfg.kl_coef);
  return out;
}

double evaluate_critic_loss(const CriticParams& p, std::span<const CriticSample> batch) {
  std::vector<double> pred, target;
  pred.reserve(batch.size());
  target.reserve(batch.size());
  for (const auto& smp : batch) {
    pred.push_back(critic_forward(p, smp.state));
    target.push_back(smp.target);
  }
  return critic_loss(pred, target);
}

ActorGrad actor_loss_grad(const ActorParams& p, std::span<const ActorSample> batch, const ActorLossConfig& cfg) {
  if (batch.empty()) throw Error(Errc::empty_batch, "actor batch is empty");
  const std::size_t D = p.input_dim();
  const std::size_t r = p.rank();
  const double c = p.scale();
  const double n = static_cast<double>(batch.size());

  ActorGrad g{Matrix(r, D), Matrix(kNumActions, r)};
  for (const auto& smp : batch) {
    const ActorPass pass = actor_pass(p, smp.state, cfg.train_mode, smp.dropout_seed);
    const std::size_t a = index_of(smp.action);
    const double lp = pass.logp[a];
    const double rt = ratio(lp, smp.logp_old);

    // d loss / d logp_new for this sample
    double dlp = 2.0 * cfg.kl_coef * (lp - smp.logp_old) / n;
    if (clip_objective_active(rt, smp.advantage, cfg.clip_eps)) dlp -= rt * smp.advantage / n;

    ActionScores dlogits;
    for (std::size_t i = 0; i < kNumActions; ++i) dlogits[i] = dlp * ((i == a ? 1.0 : 0.0) - std::exp(pass.logp[i]));

    std::vector<double> dhidden(r, 0.0);
    for (std::size_t i = 0; i < kNumActions; ++i)
      for (std::size_t k = 0; k < r; ++k) {
        g.adapter_up(i, k) += c * dlogits[i] * pass.hidden[k];
        dhidden[k] += c * p.adapter_up(i, k) * dlogits[i];
      }
    for (std::size_t k = 0; k < r; ++k)
      for (std::size_t j = 0; j < D; ++j) g.adapter_down(k, j) += dhidden[k] * pass.adapter_in[j];
  }
  return g;
}

CriticGrad critic_loss_grad(const CriticParams& p, std::span<const CriticSample> batch) {
  if (batch.empty()) throw Error(Errc::empty_batch, "critic batch is empty");
  const std::size_t D = p.input_dim();
  const std::size_t H = p.hidden_dim();
  const double n = static_cast<double>(batch.size());

  CriticGrad g{Matrix(H, D), std::vector<double>(H, 0.0), std::vector<double>(H, 0.0), 0.0};
  for (const auto& smp : batch) {
    const CriticPass pass = critic_pass(p, smp.state);
    const double dv = 2.0 * (pass.value - smp.target) / n;
    g.out_b += dv;
    for (std::size_t h = 0; h < H; ++h) {
      g.out_w[h] += dv * pass.act[h];
      const double dz = dv * p.out_w[h] * (1.0 - pass.act[h] * pass.act[h]);
      g.hidden_b[h] += dz;
      for (std::size_t j = 0; j < D; ++j) g.hidden_w(h, j) += dz * smp.state[j];
    }
  }
  return g;
}

std::vector<double> flatten_trainable(const ActorParams& p) {
  std::vector<double> out(p.adapter_down.data().begin(), p.adapter_down.data().end());
  out.insert(out.end(), p.adapter_up.data().begin(), p.adapter_up.data().end());
  return out;
}

std::vector<double> flatten_trainable(const CriticParams& p) {
  std::vector<double> out(p.hidden_w.data().begin(), p.hidden_w.data().end());
  out.insert(out.end(), p.hidden_b.begin(), p.hidden_b.end());
  out.insert(out.end(), p.out_w.begin(), p.out_w.end());
  out.push_back(p.out_b);
  return out;
}

void assign_trainable(ActorParams& p, std::span<const double> flat) {
  const std::size_t na = p.adapter_down.data().size();
  const std::size_t nb = p.adapter_up.data().size();
  if (flat.size() != na + nb) throw Error(Errc::dimension_mismatch, "actor parameter vector has wrong length");
  std::copy_n(flat.begin(), na, p.adapter_down.data().begin());
  std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(na), nb, p.adapter_up.data().begin());
}

void assign_trainable(CriticParams& p, std::span<const double> flat) {
  const std::size_t nw = p.hidden_w.data().size();
  const std::size_t H = p.hidden_dim();
  if (flat.size() != nw + 2 * H + 1) throw Error(Errc::dimension_mismatch, "critic parameter vector has wrong length");
  auto it = flat.begin();
  std::copy_n(it, nw, p.hidden_w.data().begin());
  it += static_cast<std::ptrdiff_t>(nw);
  std::copy_n(it, H, p.hidden_b.begin());
  it += static_cast<std::ptrdiff_t>(H);
  std::copy_n(it, H, p.out_w.begin());
  it += static_cast<std::ptrdiff_t>(H);
  p.out_b = *it;
}

std::vector<double> flatten(const ActorGrad& g) {
  std::vector<double> out(g.adapter_down.data().begin(), g.adapter_down.data().end());
  out.insert(out.end(), g.adapter_up.data().begin(), g.adapter_up.data().end());
  return out;
}

std::vector<double> flatten(const CriticGrad& g) {
  std::vector<double> out(g.hidden_w.data().begin(), g.hidden_w.data().end());
  out.insert(out.end(), g.hidden_b.begin(), g.hidden_b.end());
  out.insert(out.end(), g.out_w.begin(), g.out_w.end());
  out.push_back(g.out_b);
  return out;
}

std::string_view to_string(LossName name) { return name == LossName::actor_total ? "actor_total" : "critic_mse"; }

LossName parse_loss_name(std::string_view text) {
  if (text == "actor_total") return LossName::actor_total;
  if (text == "critic_mse") return LossName::critic_mse;
  throw Error(Errc::unknown_loss, "unknown loss '" + std::string(text) + "'");
}

double loss_value(LossName name, const ActorParams& actor, const CriticParams& critic, const LossBatch& batch) {
  if (name == LossName::actor_total) return evaluate_actor_loss(actor, batch.actor, batch.actor_cfg).loss;
  return evaluate_critic_loss(critic, batch.critic);
}

std::vector<double> grad(LossName name, const ActorParams& actor, const CriticParams& critic, const LossBatch& batch) {
  if (name == LossName::actor_total) return flatten(actor_loss_grad(actor, batch.actor, batch.actor_cfg));
  return flatten(critic_loss_grad(critic, batch.critic));
}

GradCheckResult grad_check(LossName name, const ActorParams& actor, const CriticParams& critic,
                           const LossBatch& batch, double h, std::size_t n_coords, std::uint64_t seed,
                           const GradientFn& analytic_fn) {
  if (!(h > 0.0)) throw Error(Errc::invalid_config, "finite-difference step h must be positive");

  const std::vector<double> analytic = analytic_fn(name, actor, critic, batch);
  ActorParams a = actor;
  CriticParams c = critic;
  const std::vector<double> theta = name == LossName::actor_total ? flatten_trainable(a) : flatten_trainable(c);
  if (analytic.size() != theta.size()) throw Error(Errc::dimension_mismatch, "gradient has wrong length");

  std::vector<std::size_t> coords(theta.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  Rng rng(derive_seed({seed, 0x6763}));
  const std::size_t take = std::min(n_coords, coords.size());
  for (std::size_t i = 0; i < take; ++i) std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
  coords.resize(take);

  auto eval_at = [&](const std::vector<double>& t) {
    if (name == LossName::actor_total) {
      assign_trainable(a, t);
    } else {
      assign_trainable(c, t);
    }
    return loss_value(name, a, c, batch);
  };

  GradCheckResult res;
  std::vector<double> probe = theta;
  for (std::size_t idx : coords) {
    probe[idx] = theta[idx] + h;
    const double up = eval_at(probe);
    probe[idx] = theta[idx] - h;
    const double down = eval_at(probe);
    probe[idx] = theta[idx];
    const double numeric = (up - down) / (2.0 * h);
    const double err = std::abs(analytic[idx] - numeric) / std::max(1e-8, std::abs(numeric));
    if (err > res.max_rel_error || res.coords_checked == 0) {
      res.max_rel_error = err;
      res.worst_index = idx;
      res.worst_analytic = analytic[idx];
      res.worst_numeric = numeric;
    }
    ++res.coords_checked;
  }
  return res;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> read_array(const ojson& j, const char* key, std::size_t expected) {
  const auto& arr = j.at(key);
  auto v = arr.get<std::vector<double>>();
  if (v.size() != expected)
    throw Error(Errc::schema_violation, std::string("checkpoint field '") + key + "' has " + std::to_string(v.size()) +
                                            " entries, expected " + std::to_string(expected));
  return v;
}

void fill(Matrix& m, const std::vector<double>& v) { std::copy(v.begin(), v.end(), m.data().begin()); }

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  const auto& a = ckpt.actor;
  const auto& c = ckpt.critic;
  ojson j;
  j["schema_version"] = kCheckpointSchemaVersion;
  j["D"] = a.input_dim();
  j["r"] = a.rank();
  j["alpha"] = a.alpha;
  j["dropout"] = a.dropout;
  j["W0"] = std::vector<double>(a.base.data().begin(), a.base.data().end());
  j["A"] = std::vector<double>(a.adapter_down.data().begin(), a.adapter_down.data().end());
  j["B"] = std::vector<double>(a.adapter_up.data().begin(), a.adapter_up.data().end());
  ojson cj;
  cj["H"] = c.hidden_dim();
  cj["W1"] = std::vector<double>(c.hidden_w.data().begin(), c.hidden_w.data().end());
  cj["b1"] = c.hidden_b;
  cj["w2"] = c.out_w;
  cj["b2"] = c.out_b;
  j["critic"] = cj;
  j["rng_state"] = ckpt.rng_state;
  ojson mj;
  mj["train_qid_begin"] = ckpt.meta.train_qid_begin;
  mj["train_qid_end"] = ckpt.meta.train_qid_end;
  mj["world_seed"] = ckpt.meta.world_seed;
  mj["K"] = ckpt.meta.K;
  j["meta"] = mj;
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(std::string_view text) {
  try {
    const auto j = ojson::parse(text.begin(), text.end());
    if (j.at("schema_version").get<int>() != kCheckpointSchemaVersion)
      throw Error(Errc::schema_violation, "unsupported checkpoint schema_version");
    const auto D = j.at("D").get<std::size_t>();
    const auto r = j.at("r").get<std::size_t>();
    Checkpoint ck;
    ck.actor.alpha = j.at("alpha").get<double>();
    ck.actor.dropout = j.at("dropout").get<double>();
    ck.actor.base = Matrix(kNumActions, D);
    ck.actor.adapter_down = Matrix(r, D);
    ck.actor.adapter_up = Matrix(kNumActions, r);
    fill(ck.actor.base, read_array(j, "W0", kNumActions * D));
    fill(ck.actor.adapter_down, read_array(j, "A", r * D));
    fill(ck.actor.adapter_up, read_array(j, "B", kNumActions * r));

    const auto& cj = j.at("critic");
    const auto H = cj.at("H").get<std::size_t>();
    ck.critic.hidden_w = Matrix(H, D);
    fill(ck.critic.hidden_w, read_array(cj, "W1", H * D));
    ck.critic.hidden_b = read_array(cj, "b1", H);
    ck.critic.out_w = read_array(cj, "w2", H);
    ck.critic.out_b = cj.at("b2").get<double>();
    ck.rng_state = j.at("rng_state").get<std::uint64_t>();
    if (j.contains("meta")) {
      const auto& mj = j.at("meta");
      ck.meta.train_qid_begin = mj.value("train_qid_begin", 0);
      ck.meta.train_qid_end = mj.value("train_qid_end", 0);
      ck.meta.world_seed = mj.value("world_seed", std::uint64_t{0});
      ck.meta.K = mj.value("K", 5);
    }
    return ck;
  } catch (const ojson::exception& e) {
    throw Error(Errc::schema_violation, std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(Errc::io_error, "cannot open " + tmp.string());
    out << checkpoint_to_json(ckpt);
    if (!out) throw Error(Errc::io_error, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::io_error, "rename to " + path.string() + " failed: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace spark
