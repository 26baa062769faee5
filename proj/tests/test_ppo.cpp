#include <cmath>
#include <vector>

#include "doctest.h"
#include "spark/cli.hpp"
#include "spark/error.hpp"
#include "spark/ppo_math.hpp"
#include "spark/ppo_trainer.hpp"
#include "spark/rng.hpp"
#include "spark/rollout.hpp"

using namespace spark;

namespace {

Dataset small_dataset(int n_tasks = 12, std::uint64_t seed = 42) {
  GenerationConfig g;
  g.n_tasks = n_tasks;
  g.seed = seed;
  return generate_dataset(g);
}

StateFeatures state_for(int type, int step) { return featurize({type, step, 5, {}, 0.0, false}); }

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected spark::Error");
  return Errc::io_error;
}

}  // namespace

TEST_CASE("advantage and ratio") {
  CHECK(advantage(0.15, 0.0) == 0.15);
  CHECK(advantage(1.0, 1.0) == 0.0);
  CHECK(advantage(-0.5, 0.25) == -0.75);
  CHECK(ratio(-1.3, -1.3) == 1.0);
  CHECK(ratio(std::log(2.0), 0.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(ratio(-std::log(4.0), 0.0) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("clip objective examples") {
  for (double a : {-3.0, 0.0, 0.7, 5.0}) CHECK(clip_objective(1.0, a, 0.2) == a);
  CHECK(clip_objective(1.5, 2.0, 0.2) == doctest::Approx(2.4).epsilon(1e-15));
  CHECK(clip_objective(0.5, -1.0, 0.2) == doctest::Approx(-0.8).epsilon(1e-15));
}

TEST_CASE("clip bound holds for random ratios and advantages") {
  Rng rng(1);
  for (int n = 0; n < 20000; ++n) {
    const double r = std::exp(rng.uniform(-2.0, 2.0));
    const double a = rng.uniform(-5.0, 5.0);
    const double eps = rng.uniform(0.01, 0.5);
    const double c = clip_objective(r, a, eps);
    CHECK(c <= std::max(r * a, (1.0 + eps) * a) + 1e-12);
    CHECK(c <= r * a + 1e-12);
    if (r >= 1.0 - eps && r <= 1.0 + eps) CHECK(c == r * a);
    if (a > 0.0) CHECK(c <= (1.0 + eps) * a + 1e-12);
  }
}

TEST_CASE("kl penalty") {
  const std::vector<double> x = {-1.0, -2.0};
  CHECK(kl_penalty(x, x) == 0.0);
  CHECK(kl_penalty(std::vector<double>{0.3}, std::vector<double>{0.0}) == doctest::Approx(0.09).epsilon(1e-14));
  CHECK(kl_penalty(std::vector<double>{0.1, -0.1}, std::vector<double>{0.0, 0.0}) ==
        doctest::Approx(0.01).epsilon(1e-14));
  CHECK(code_of([&] { kl_penalty(x, std::vector<double>{1.0}); }) == Errc::length_mismatch);

  Rng rng(2);
  for (int n = 0; n < 2000; ++n) {
    std::vector<double> a(5), b(5);
    for (std::size_t i = 0; i < 5; ++i) a[i] = b[i] = rng.uniform(-5.0, 0.0);
    CHECK(kl_penalty(a, b) == 0.0);
    a[rng.below(5)] += rng.uniform(0.001, 1.0);
    CHECK(kl_penalty(a, b) > 0.0);
  }
}

TEST_CASE("actor loss examples") {
  const std::vector<SurrogateTerm> same = {{-1.0, -1.0, 0.5}, {-2.0, -2.0, -1.5}};
  CHECK(actor_loss(same, 0.2, 0.1) == doctest::Approx(0.5).epsilon(1e-15));

  const std::vector<SurrogateTerm> one = {{std::log(1.5), 0.0, 2.0}};
  CHECK(actor_loss(one, 0.2, 0.0) == doctest::Approx(-2.4).epsilon(1e-14));
  CHECK(actor_loss(one, 0.2, 0.1) == doctest::Approx(-2.38356).epsilon(1e-6));
  CHECK(code_of([] { actor_loss(std::vector<SurrogateTerm>{}, 0.2, 0.1); }) == Errc::empty_batch);
}

TEST_CASE("critic loss examples") {
  CHECK(critic_loss(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 2.0}) == 0.0);
  CHECK(critic_loss(std::vector<double>{2.0}, std::vector<double>{3.0}) == 1.0);
  CHECK(critic_loss(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, -1.0}) == 1.0);
  CHECK(code_of([] { critic_loss(std::vector<double>{0.0}, std::vector<double>{}); }) == Errc::length_mismatch);
}

TEST_CASE("trainer rewards come from the composite reward") {
  const Dataset d = small_dataset(2);
  const RewardConfig cfg{0.5, ProcessOkSign::flipped};
  const auto ts = make_transitions(d, cfg);
  REQUIRE(ts.size() == d.records.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto& r = d.records[i];
    CHECK(ts[i].reward == composite_reward(r.chosen_score, r.best_score, r.process_ok, cfg));
  }
}

TEST_CASE("lr = 0 and epochs = 0 leave parameters unchanged") {
  const Dataset d = small_dataset();
  const ActorParams a = init_actor(20, {}, 1);
  const CriticParams c = init_critic(20, kCriticHidden, 1);

  TrainerConfig zero_lr;
  zero_lr.lr = 0.0;
  const auto r1 = train(d, a, c, zero_lr);
  CHECK(r1.actor == a);
  CHECK(r1.critic == c);
  CHECK_FALSE(r1.log.updates.empty());

  TrainerConfig no_epochs;
  no_epochs.lr = 0.1;
  no_epochs.epochs = 0;
  const auto r2 = train(d, a, c, no_epochs);
  CHECK(r2.actor == a);
  CHECK(r2.critic == c);
  CHECK(r2.log.updates.empty());
}

TEST_CASE("a KL of 0.25 triggers exactly one early stop per epoch") {
  ActorParams a = init_actor(20, {}, 3);
  CriticParams c = init_critic(20, kCriticHidden, 3);
  std::vector<Transition> ts;
  for (int i = 0; i < 24; ++i) {
    Transition t;
    t.state = state_for(i % 4, 1 + i % 5);
    t.action = action_at(static_cast<std::size_t>(i % 9));
    t.reward = 0.3;
    t.logp_old = actor_forward(a, t.state, false)[index_of(t.action)] - 0.5;
    ts.push_back(t);
  }
  TrainerConfig cfg;
  cfg.lr = 0.0;
  const auto recs = run_epoch(0, ts, a, c, cfg);
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].kl == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(recs[0].early_stop);
  CHECK(recs[0].actor_updated);
  CHECK_FALSE(recs[1].early_stop);
  CHECK_FALSE(recs[1].actor_updated);
  CHECK_FALSE(recs[2].early_stop);

  // Below the target nothing stops.
  for (auto& t : ts) t.logp_old += 0.1;  // shift 0.4, KL 0.16
  const auto calm = run_epoch(1, ts, a, c, cfg);
  for (const auto& r : calm) {
    CHECK_FALSE(r.early_stop);
    CHECK(r.actor_updated);
  }
}

TEST_CASE("early stops are recorded at most once per epoch during training") {
  const Dataset d = small_dataset(40);
  TrainerConfig cfg;
  cfg.lr = 0.3;
  cfg.epochs = 4;
  cfg.target_kl = 1e-4;
  const auto r = train(d, init_actor(20, {}, 1), init_critic(20, kCriticHidden, 1), cfg);
  std::vector<int> per_epoch(4, 0);
  for (const auto& u : r.log.updates) per_epoch[u.epoch] += u.early_stop ? 1 : 0;
  for (int n : per_epoch) CHECK(n <= 1);
  CHECK(r.log.early_stops >= 1);

  // Log ordering is monotone in (epoch, batch).
  for (std::size_t i = 1; i < r.log.updates.size(); ++i) {
    const auto& p = r.log.updates[i - 1];
    const auto& q = r.log.updates[i];
    CHECK((q.epoch > p.epoch || (q.epoch == p.epoch && q.batch == p.batch + 1)));
  }
}

TEST_CASE("a small actor step decreases the loss to first order") {
  Rng rng(5);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto setup = cli::make_gradcheck_setup(RunConfig{}, seed);
    const auto g = grad(LossName::actor_total, setup.actor, setup.critic, setup.batch);
    double g2 = 0.0;
    for (double x : g) g2 += x * x;
    REQUIRE(g2 > 0.0);
    const double eta = 1e-6;
    auto theta = flatten_trainable(setup.actor);
    const double before = loss_value(LossName::actor_total, setup.actor, setup.critic, setup.batch);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= eta * g[i];
    ActorParams stepped = setup.actor;
    assign_trainable(stepped, theta);
    const double after = loss_value(LossName::actor_total, stepped, setup.critic, setup.batch);
    CHECK(after < before);
    CHECK((before - after) == doctest::Approx(eta * g2).epsilon(1e-3));
  }
}

TEST_CASE("critic fits a tiny frozen dataset") {
  CriticParams c = init_critic(20, kCriticHidden, 7);
  std::vector<CriticSample> batch;
  Rng rng(8);
  for (int i = 0; i < 8; ++i) batch.push_back({state_for(i % 4, 1 + i % 5), rng.uniform(-1.0, 2.0)});

  const double lr = 0.05;
  std::vector<double> losses;
  for (int step = 0; step < 200; ++step) {
    losses.push_back(evaluate_critic_loss(c, batch));
    const CriticGrad g = critic_loss_grad(c, batch);
    auto flat = flatten_trainable(c);
    const auto gf = flatten(g);
    for (std::size_t i = 0; i < flat.size(); ++i) flat[i] -= lr * gf[i];
    assign_trainable(c, flat);
  }
  losses.push_back(evaluate_critic_loss(c, batch));
  MESSAGE("critic loss " << losses.front() << " -> " << losses.back());
  for (std::size_t i = 11; i < losses.size(); ++i) CHECK(losses[i] <= losses[i - 1]);
  CHECK(losses.back() < 0.1 * losses.front());
}

TEST_CASE("training is deterministic in the seed") {
  const Dataset d = small_dataset(30);
  TrainerConfig cfg;
  cfg.lr = 0.1;
  const auto a = init_actor(20, {}, 2);
  const auto c = init_critic(20, kCriticHidden, 2);
  const auto r1 = train(d, a, c, cfg);
  const auto r2 = train(d, a, c, cfg);
  CHECK(r1.actor == r2.actor);
  CHECK(r1.critic == r2.critic);
  CHECK(r1.rng_state == r2.rng_state);
  REQUIRE(r1.log.updates.size() == r2.log.updates.size());
  for (std::size_t i = 0; i < r1.log.updates.size(); ++i)
    CHECK(update_record_to_json(r1.log.updates[i]) == update_record_to_json(r2.log.updates[i]));

  cfg.seed = 43;
  const auto r3 = train(d, a, c, cfg);
  CHECK_FALSE(r3.actor == r1.actor);
}

TEST_CASE("trainer rejects bad inputs") {
  Dataset d = small_dataset(2);
  TrainerConfig cfg;
  const auto a = init_actor(20, {}, 1);
  const auto c = init_critic(20, kCriticHidden, 1);
  Dataset broken = d;
  broken.records.pop_back();
  CHECK(code_of([&] { train(broken, a, c, cfg); }) == Errc::invalid_dataset);
  CHECK(code_of([&] { train(d, init_actor(21, {}, 1), init_critic(21, kCriticHidden, 1), cfg); }) ==
        Errc::invalid_dataset);
  cfg.clip_eps = 0.0;
  CHECK(code_of([&] { train(d, a, c, cfg); }) == Errc::invalid_config);
  cfg = {};
  cfg.lr = 1e6;
  cfg.epochs = 20;
  CHECK(code_of([&] { train(small_dataset(20), a, c, cfg); }) == Errc::non_finite_loss);
}
