#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cfrl/ddpg.hpp"
#include "cfrl/error.hpp"
#include "cfrl/metrics.hpp"
#include "cfrl/trajectory.hpp"
#include "support/oracles.hpp"

using namespace cfrl;

namespace {

Transition make_transition(double r, bool terminal, int dim = 3) {
  return {Eigen::VectorXd::Constant(dim, 0.2), 1.0, r, Eigen::VectorXd::Constant(dim, 0.3), terminal};
}

TrainConfig small_config(std::uint64_t seed) {
  TrainConfig c;
  c.seed = seed;
  c.episodes = 2;
  c.minibatch = 32;
  c.replay_start = 64;
  c.replay_capacity = 1000;
  return c;
}

std::vector<CFPeriod> tiny_data(std::uint64_t seed, std::size_t n = 2) {
  GeneratorOptions o;
  o.accel_noise_std = 0.0;
  o.max_duration = 18.0;
  return generate_synthetic_driver(DrivingStyle::kAggressive, n, seed, o).periods;
}

}  // namespace

TEST(Reward, Examples) {
  EXPECT_NEAR(reward(20.0, 10.0), 0.0, 1e-15);  // e = 1
  EXPECT_NEAR(reward(11.0, 10.0), 2.302585, 1e-6);
  EXPECT_NEAR(reward(10.0, 10.0), 6.907755, 1e-6);
  EXPECT_NEAR(max_reward(), 6.907755, 1e-6);
  EXPECT_NEAR(min_reward(), -6.907755, 1e-6);
  EXPECT_NEAR(reward(1e9, 1.0), min_reward(), 1e-12);
}

TEST(Reward, InvalidObservation) {
  for (double obs : {0.0, -1.0}) {
    try {
      reward(1.0, obs);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidObservation);
    }
  }
}

TEST(Reward, NonIncreasingInError) {
  double prev = max_reward();
  for (double d = 0.0; d < 50.0; d += 0.01) {
    const double r = reward(10.0 + d, 10.0);
    EXPECT_LE(r, prev);
    prev = r;
  }
}

TEST(SelectAction, Examples) {
  EXPECT_EQ(scale_action(0.0, 0.0), 0.0);
  EXPECT_EQ(scale_action(1.0, 0.0), 3.0);
  EXPECT_EQ(scale_action(0.9, 0.5), 3.0);
  EXPECT_NEAR(scale_action(-0.1, 0.1), -0.2, 1e-15);
}

TEST(SelectAction, BoundedUnderArbitraryNoise) {
  Rng rng(1);
  auto actor = DenseNet::make({3, 30, 1}, Activation::kRelu, Activation::kTanh, rng);
  std::normal_distribution<double> n(0.0, 100.0);
  for (int i = 0; i < 10000; ++i) {
    const double a = select_action(actor, Eigen::Vector3d(n(rng), n(rng), n(rng)), n(rng));
    EXPECT_LE(std::abs(a), 3.0);
  }
}

TEST(OUNoise, Examples) {
  OUNoise ou(0.15, 0.0);
  ou.reset(1.0);
  EXPECT_DOUBLE_EQ(ou.step_with(1.7), 0.85);
  ou.reset(0.0);
  EXPECT_EQ(ou.step_with(0.3), 0.0);
  OUNoise u(0.15, 0.2);
  EXPECT_NEAR(u.step_with(1.0), 0.2, 1e-15);
  EXPECT_NEAR(u.step_with(0.0), 0.17, 1e-15);
}

TEST(OUNoise, StationaryStd) {
  OUNoise ou(0.15, 0.2);
  Rng rng(7);
  double s = 0.0, ss = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double x = ou.step(rng);
    s += x;
    ss += x * x;
  }
  const double sd = std::sqrt(ss / n - (s / n) * (s / n));
  EXPECT_NEAR(oracle::ou_stationary_std(0.15, 0.2), 0.37966, 1e-5);
  EXPECT_NEAR(sd, 0.38, 0.02);
}

TEST(ReplayBuffer, FifoEviction) {
  ReplayBuffer rb(10000);
  for (int i = 0; i < 25000; ++i) rb.push(make_transition(i, false));
  ASSERT_EQ(rb.size(), 10000u);
  for (std::size_t i = 0; i < rb.size(); ++i) EXPECT_EQ(rb.at(i).r, 15000.0 + static_cast<double>(i));
  rb.clear();
  EXPECT_EQ(rb.size(), 0u);
  Rng rng(1);
  EXPECT_THROW(rb.sample(4, rng), Error);
}

TEST(ReplayBuffer, SamplesStoredTransitions) {
  ReplayBuffer rb(50);
  for (int i = 0; i < 20; ++i) rb.push(make_transition(i, false));
  Rng rng(3);
  const auto batch = rb.sample(256, rng);
  EXPECT_EQ(batch.size(), 256u);
  for (const auto* t : batch) {
    EXPECT_GE(t->r, 0.0);
    EXPECT_LT(t->r, 20.0);
  }
}

TEST(InputWindow, PaddingOrderAndHorizon) {
  InputWindow w(10);
  w.reset({3.0, 1.0, 10.0});
  Eigen::VectorXd x = w.encode();
  ASSERT_EQ(x.size(), 30);
  for (int k = 0; k < 10; ++k) EXPECT_DOUBLE_EQ(x(3 * k), 0.1);
  w.push({6.0, 0.0, 20.0});
  x = w.encode();
  EXPECT_DOUBLE_EQ(x(27), 0.2);  // newest last
  EXPECT_DOUBLE_EQ(x(0), 0.1);

  // States older than the window cannot affect the encoding.
  InputWindow a(10), b(10);
  a.reset({1.0, 0.0, 5.0});
  b.reset({25.0, -4.0, 90.0});
  for (int i = 0; i < 12; ++i) {
    a.push({static_cast<double>(i), 0.5, 30.0});
    b.push({static_cast<double>(i), 0.5, 30.0});
  }
  EXPECT_EQ(a.encode(), b.encode());
}

TEST(CriticTargets, Examples) {
  TrainConfig cfg = small_config(1);
  cfg.gamma = 0.9;
  DdpgModel m = DdpgModel::create(cfg);
  m.target_critic.params().setZero();
  m.target_critic.bias(1)(0) = 2.0;  // constant critic
  const Transition live = make_transition(1.0, false);
  const Transition term = make_transition(1.0, true);
  const std::vector<const Transition*> batch{&live, &term};
  const Eigen::VectorXd y = critic_targets(batch, m);
  EXPECT_NEAR(y(0), 2.8, 1e-12);
  EXPECT_DOUBLE_EQ(y(1), 1.0);

  cfg.gamma = 1e-300;  // effectively zero discount
  DdpgModel z = DdpgModel::create(cfg);
  const Eigen::VectorXd y0 = critic_targets(batch, z);
  EXPECT_NEAR(y0(0), 1.0, 1e-12);
}

TEST(TrainStep, TauOneCopiesMains) {
  TrainConfig cfg = small_config(2);
  cfg.tau = 1.0;
  DdpgModel m = DdpgModel::create(cfg);
  std::vector<Transition> ts;
  for (int i = 0; i < 8; ++i) ts.push_back(make_transition(0.1 * i, i == 3));
  std::vector<const Transition*> batch;
  for (const auto& t : ts) batch.push_back(&t);
  train_step(m, batch);
  EXPECT_EQ(m.target_actor.params(), m.actor.params());
  EXPECT_EQ(m.target_critic.params(), m.critic.params());
  EXPECT_EQ(m.updates, 1);
}

TEST(TrainStep, CriticRegressionLossDecreases) {
  DdpgModel m = DdpgModel::create(small_config(3));
  Rng rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Transition> ts;
  for (int i = 0; i < 64; ++i) {
    Transition t{Eigen::Vector3d(u(rng), u(rng), u(rng)), 3.0 * u(rng), 0.0, Eigen::Vector3d::Zero(), true};
    t.r = 0.5 * t.s(0) - t.s(2) + 0.2 * t.a;
    ts.push_back(t);
  }
  std::vector<const Transition*> batch;
  for (const auto& t : ts) batch.push_back(&t);
  Eigen::VectorXd y(64);
  for (int i = 0; i < 64; ++i) y(i) = ts[static_cast<std::size_t>(i)].r;
  double prev = critic_update(m, batch, y);
  const double first = prev;
  int upticks = 0;
  for (int k = 0; k < 50; ++k) {
    const double l = critic_update(m, batch, y);
    if (l > prev) ++upticks;
    prev = l;
  }
  EXPECT_LE(upticks, 5);
  EXPECT_LT(prev, first);
}

TEST(TrainStep, ActorMovesTowardHigherQ) {
  TrainConfig cfg = small_config(4);
  DdpgModel m = DdpgModel::create(cfg);
  // Critic Q = action input (last row) with unit slope.
  m.critic.params().setZero();
  m.critic.weights(0)(0, 3) = 1.0;
  m.critic.weights(1)(0, 0) = 1.0;
  m.critic.bias(0)(0) = 1.0;
  const Transition t = make_transition(0.0, false);
  const std::vector<const Transition*> batch{&t};
  const double before = m.actor.forward(t.s)(0);
  for (int i = 0; i < 20; ++i) actor_update(m, batch);
  EXPECT_GT(m.actor.forward(t.s)(0), before);
}

TEST(Train, ZeroEpisodesReturnsUntrained) {
  TrainConfig cfg = small_config(5);
  cfg.episodes = 0;
  const auto data = tiny_data(1);
  const auto res = train(data, {}, cfg);
  EXPECT_TRUE(res.curves.empty());
  EXPECT_EQ(res.best_episode, 0);
  EXPECT_EQ(res.model.actor.params(), DdpgModel::create(cfg).actor.params());
}

TEST(Train, DeterministicCurves) {
  const auto data = tiny_data(2);
  const auto a = train(data, data, small_config(6));
  const auto b = train(data, data, small_config(6));
  ASSERT_EQ(a.curves.size(), 2u);
  for (std::size_t i = 0; i < a.curves.size(); ++i) {
    EXPECT_EQ(a.curves[i].reward_mean, b.curves[i].reward_mean);
    EXPECT_EQ(a.curves[i].rmspe_train, b.curves[i].rmspe_train);
  }
  EXPECT_EQ(a.model.actor.params(), b.model.actor.params());
  EXPECT_GT(a.model.updates, 0);
  EXPECT_LE(a.best_score, a.initial_train_rmspe + a.initial_test_rmspe);
}

TEST(Train, ReactionTimeShapes) {
  TrainConfig cfg = small_config(7);
  cfg.rt_window = 10;
  const DdpgModel m = DdpgModel::create(cfg);
  EXPECT_EQ(m.actor.input_dim(), 30);
  EXPECT_EQ(m.critic.input_dim(), 31);
  EXPECT_EQ(m.actor.layer(0).out, 100);
  const auto res = train(tiny_data(3), {}, cfg);
  EXPECT_EQ(res.curves.size(), 2u);
}

TEST(Retrain, ClearsReplayAndKeepsWeights) {
  const auto data = tiny_data(4);
  TrainConfig cfg = small_config(8);
  const auto first = train(data, data, cfg);
  DdpgModel m = first.model;
  m.replay.push(make_transition(0.0, false));
  ASSERT_GT(m.replay.size(), 0u);
  std::vector<std::size_t> seen;
  cfg.episodes = 1;
  const auto again = retrain(m, data, data, cfg, [&](int, const DdpgModel& mm) { seen.push_back(mm.replay.size()); });
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_EQ(seen[0], 0u);
  EXPECT_GT(again.model.replay.size(), 0u);
  const RolloutErrors start = evaluate_policy(first.model.policy(), data);
  EXPECT_DOUBLE_EQ(again.initial_train_rmspe, start.spacing);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.replay_start = 20000;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.gamma = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.hidden_width(), 30);
  c.rt_window = 10;
  EXPECT_EQ(c.hidden_width(), 100);
}

TEST(DdpgJson, RoundTrip) {
  TrainConfig cfg = small_config(9);
  cfg.reward_mode = RewardMode::kSpeed;
  cfg.rt_window = 10;
  const DdpgModel m = DdpgModel::create(cfg);
  const DdpgModel back = ddpg_model_from_json(nlohmann::json::parse(to_json(m).dump()));
  EXPECT_EQ(back.actor.params(), m.actor.params());
  EXPECT_EQ(back.critic.params(), m.critic.params());
  EXPECT_EQ(back.config.reward_mode, RewardMode::kSpeed);
  EXPECT_EQ(back.config.rt_window, 10);
  const auto p = tiny_data(5, 1).front();
  const auto a = run_episode(m.policy(), p);
  const auto b = run_episode(back.policy(), p);
  EXPECT_EQ(a.states.back(), b.states.back());
}
