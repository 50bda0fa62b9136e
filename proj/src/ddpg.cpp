#include "cfrl/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cfrl/error.hpp"
#include "cfrl/metrics.hpp"

namespace cfrl {

const char* to_string(RewardMode mode) { return mode == RewardMode::kSpacing ? "spacing" : "speed"; }

RewardMode reward_mode_from_string(const std::string& name) {
  if (name == "spacing") return RewardMode::kSpacing;
  if (name == "speed") return RewardMode::kSpeed;
  throw Error(ErrorCode::kInvalidArgument, "unknown reward mode '" + name + "'");
}

double reward(double sim, double obs) {
  if (!(obs > 0.0)) throw Error(ErrorCode::kInvalidObservation, "observed value must be positive");
  const double e = std::clamp(std::abs(sim - obs) / obs, kRewardErrorFloor, kRewardErrorCeil);
  return -std::log(e);
}

double max_reward() { return -std::log(kRewardErrorFloor); }
double min_reward() { return -std::log(kRewardErrorCeil); }

// ---------------------------------------------------------------------------

InputWindow::InputWindow(int window, StateScale scale) : window_(window), scale_(scale) {
  if (window_ < 1) throw Error(ErrorCode::kInvalidArgument, "input window must hold at least one state");
}

void InputWindow::reset(const CFState& initial) {
  states_.assign(static_cast<std::size_t>(window_), initial);
}

void InputWindow::push(const CFState& s) {
  if (states_.empty()) {
    reset(s);
    return;
  }
  states_.pop_front();
  states_.push_back(s);
}

Eigen::VectorXd InputWindow::encode() const {
  if (states_.empty()) throw Error(ErrorCode::kInvalidArgument, "input window used before reset");
  Eigen::VectorXd x(dim());
  Eigen::Index k = 0;
  for (const auto& s : states_) {
    x(k++) = s.v_follow / scale_.v;
    x(k++) = s.dv / scale_.dv;
    x(k++) = s.gap / scale_.gap;
  }
  return x;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, msg); };
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must lie in (0, 1]");
  if (!(tau > 0.0 && tau <= 1.0)) fail("tau must lie in (0, 1]");
  if (minibatch < 1) fail("minibatch must be >= 1");
  if (replay_capacity < 1 || replay_start > replay_capacity) fail("replay_start must not exceed replay_capacity");
  if (episodes < 0) fail("episodes must be >= 0");
  if (rt_window < 1) fail("rt_window must be >= 1");
  if (ou_theta < 0.0 || ou_sigma < 0.0) fail("OU parameters must be non-negative");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"gamma", c.gamma},
          {"minibatch", c.minibatch},
          {"replay_start", c.replay_start},
          {"replay_capacity", c.replay_capacity},
          {"tau", c.tau},
          {"episodes", c.episodes},
          {"ou_theta", c.ou_theta},
          {"ou_sigma", c.ou_sigma},
          {"reward_mode", to_string(c.reward_mode)},
          {"rt_window", c.rt_window},
          {"hidden", c.hidden_width()},
          {"seed", c.seed},
          {"normalization", {{"v", c.scale.v}, {"dv", c.scale.dv}, {"gap", c.scale.gap}}}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.gamma = j.value("gamma", c.gamma);
  c.minibatch = j.value("minibatch", c.minibatch);
  c.replay_start = j.value("replay_start", c.replay_start);
  c.replay_capacity = j.value("replay_capacity", c.replay_capacity);
  c.tau = j.value("tau", c.tau);
  c.episodes = j.value("episodes", c.episodes);
  c.ou_theta = j.value("ou_theta", c.ou_theta);
  c.ou_sigma = j.value("ou_sigma", c.ou_sigma);
  c.reward_mode = reward_mode_from_string(j.value("reward_mode", std::string("spacing")));
  c.rt_window = j.value("rt_window", c.rt_window);
  c.hidden = j.value("hidden", 0);
  c.seed = j.value("seed", c.seed);
  if (j.contains("normalization")) {
    const auto& n = j.at("normalization");
    c.scale = {n.at("v").get<double>(), n.at("dv").get<double>(), n.at("gap").get<double>()};
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw Error(ErrorCode::kInvalidArgument, "replay capacity must be positive");
  ring_.reserve(capacity_);
}

void ReplayBuffer::push(Transition t) {
  if (ring_.size() < capacity_) {
    ring_.push_back(std::move(t));
  } else {
    ring_[head_] = std::move(t);
  }
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

void ReplayBuffer::clear() {
  ring_.clear();
  head_ = 0;
  size_ = 0;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw Error(ErrorCode::kInvalidArgument, "replay index out of range");
  const std::size_t oldest = size_ < capacity_ ? 0 : head_;
  return ring_[(oldest + i) % capacity_];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (size_ == 0) throw Error(ErrorCode::kInsufficientData, "sampling from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  std::vector<const Transition*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(&ring_[pick(rng)]);
  return out;
}

// ---------------------------------------------------------------------------

double OUNoise::step_with(double gaussian) {
  x_ = x_ + theta_ * (0.0 - x_) + sigma_ * gaussian;
  return x_;
}

double OUNoise::step(Rng& rng) { return step_with(std::normal_distribution<double>(0.0, 1.0)(rng)); }

double scale_action(double tanh_output, double noise) {
  return clamp_action(kMaxAcceleration * tanh_output + noise);
}

double select_action(const DenseNet& actor, const Eigen::VectorXd& input, double noise) {
  return scale_action(actor.forward(input)(0), noise);
}

// ---------------------------------------------------------------------------

DdpgModel DdpgModel::create(const TrainConfig& cfg) {
  cfg.validate();
  Rng init(derive_seed(cfg.seed, SeedStream::kInit));
  const int in = 3 * cfg.rt_window;
  const int hidden = cfg.hidden_width();
  DdpgModel m{.config = cfg,
              .actor = DenseNet::make({in, hidden, 1}, Activation::kRelu, Activation::kTanh, init),
              .critic = DenseNet::make({in + 1, hidden, 1}, Activation::kRelu, Activation::kIdentity, init),
              .target_actor = {},
              .target_critic = {},
              .actor_opt = {},
              .critic_opt = {},
              .replay = ReplayBuffer(cfg.replay_capacity),
              .noise = OUNoise(cfg.ou_theta, cfg.ou_sigma),
              .noise_rng = Rng(derive_seed(cfg.seed, SeedStream::kNoise)),
              .replay_rng = Rng(derive_seed(cfg.seed, SeedStream::kReplay)),
              .updates = 0};
  m.target_actor = m.actor;
  m.target_critic = m.critic;
  const AdamConfig adam{.learning_rate = cfg.learning_rate};
  m.actor_opt = AdamState(m.actor.num_params(), adam);
  m.critic_opt = AdamState(m.critic.num_params(), adam);
  return m;
}

Policy DdpgModel::policy() const {
  auto window = std::make_shared<InputWindow>(make_window());
  return [actor = actor, window](std::size_t step, const CFState& s) {
    if (step == 0) {
      window->reset(s);
    } else {
      window->push(s);
    }
    return scale_action(actor.forward(window->encode())(0), 0.0);
  };
}

// ---------------------------------------------------------------------------

namespace {

// Critic input: the encoded state stacked over the action scaled to [-1, 1].
Eigen::MatrixXd critic_input(const Eigen::MatrixXd& states, const Eigen::RowVectorXd& scaled_actions) {
  Eigen::MatrixXd x(states.rows() + 1, states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(1) = scaled_actions;
  return x;
}

struct Batch {
  Eigen::MatrixXd s;
  Eigen::RowVectorXd a;
  Eigen::VectorXd r;
  Eigen::MatrixXd s_next;
  Eigen::VectorXd not_terminal;
};

Batch gather(std::span<const Transition* const> batch) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "empty minibatch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto dim = batch.front()->s.size();
  Batch b{Eigen::MatrixXd(dim, n), Eigen::RowVectorXd(n), Eigen::VectorXd(n), Eigen::MatrixXd(dim, n),
          Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = *batch[static_cast<std::size_t>(i)];
    b.s.col(i) = t.s;
    b.a(i) = t.a / kMaxAcceleration;
    b.r(i) = t.r;
    b.s_next.col(i) = t.s_next;
    b.not_terminal(i) = t.terminal ? 0.0 : 1.0;
  }
  return b;
}

Eigen::VectorXd targets_for(const Batch& b, const DdpgModel& model) {
  const Eigen::MatrixXd mu_next = model.target_actor.forward_batch(b.s_next);
  const Eigen::MatrixXd q_next = model.target_critic.forward_batch(critic_input(b.s_next, mu_next.row(0)));
  return b.r + model.config.gamma * b.not_terminal.cwiseProduct(q_next.row(0).transpose());
}

double critic_update_batch(DdpgModel& model, const Batch& b, const Eigen::VectorXd& y) {
  ForwardCache cache;
  const Eigen::MatrixXd q = model.critic.forward_batch(critic_input(b.s, b.a), &cache);
  const auto n = static_cast<double>(b.r.size());
  const Eigen::RowVectorXd err = q.row(0) - y.transpose();
  const double loss = err.squaredNorm() / n;
  if (!std::isfinite(loss)) throw Error(ErrorCode::kDivergence, "critic loss is not finite");
  const Eigen::MatrixXd grad_q = (2.0 / n) * err;
  const Eigen::VectorXd grads = model.critic.backward_batch(cache, grad_q);
  adam_step(model.critic_opt, model.critic.params(), grads);
  return loss;
}

double actor_update_batch(DdpgModel& model, const Batch& b) {
  ForwardCache actor_cache;
  const Eigen::MatrixXd mu = model.actor.forward_batch(b.s, &actor_cache);
  ForwardCache critic_cache;
  const Eigen::MatrixXd q = model.critic.forward_batch(critic_input(b.s, mu.row(0)), &critic_cache);
  const auto n = static_cast<double>(b.s.cols());
  Eigen::MatrixXd grad_input;
  model.critic.backward_batch(critic_cache, Eigen::MatrixXd::Constant(1, b.s.cols(), 1.0 / n), &grad_input);
  // Ascend mean Q: descend -dQ/dmu through the actor.
  const Eigen::MatrixXd grad_mu = -grad_input.bottomRows(1);
  const Eigen::VectorXd grads = model.actor.backward_batch(actor_cache, grad_mu);
  adam_step(model.actor_opt, model.actor.params(), grads);
  return q.mean();
}

}  // namespace

Eigen::VectorXd critic_targets(std::span<const Transition* const> batch, const DdpgModel& model) {
  return targets_for(gather(batch), model);
}

double critic_update(DdpgModel& model, std::span<const Transition* const> batch, const Eigen::VectorXd& y) {
  return critic_update_batch(model, gather(batch), y);
}

void actor_update(DdpgModel& model, std::span<const Transition* const> batch) {
  actor_update_batch(model, gather(batch));
}

void update_targets(DdpgModel& model) {
  soft_update(model.target_critic, model.critic, model.config.tau);
  soft_update(model.target_actor, model.actor, model.config.tau);
}

TrainStepStats train_step(DdpgModel& model, std::span<const Transition* const> batch) {
  const Batch b = gather(batch);
  TrainStepStats stats;
  const Eigen::VectorXd y = targets_for(b, model);
  stats.critic_loss = critic_update_batch(model, b, y);
  stats.mean_q = actor_update_batch(model, b);
  update_targets(model);
  ++model.updates;
  return stats;
}

// ---------------------------------------------------------------------------

namespace {

struct Snapshot {
  DenseNet actor, critic, target_actor, target_critic;
};

Snapshot take_snapshot(const DdpgModel& m) { return {m.actor, m.critic, m.target_actor, m.target_critic}; }

void restore(DdpgModel& m, const Snapshot& s) {
  m.actor = s.actor;
  m.critic = s.critic;
  m.target_actor = s.target_actor;
  m.target_critic = s.target_critic;
}

double step_reward(RewardMode mode, const CFState& sim, const CFSample& obs, bool collided) {
  if (collided) return min_reward();
  if (mode == RewardMode::kSpacing) return reward(sim.gap, std::max(obs.gap, kRewardGapFloor));
  return reward(sim.v_follow, std::max(obs.v_follow, kRewardSpeedFloor));
}

// One exploratory pass over `period`; returns the summed reward and step count.
std::pair<double, std::size_t> explore_period(DdpgModel& model, const CFPeriod& period) {
  if (period.size() < 2) throw Error(ErrorCode::kEmptyPeriod, "period has fewer than 2 samples");
  InputWindow window = model.make_window();
  CFState s = period.state_at(0);
  window.reset(s);
  Eigen::VectorXd x = window.encode();
  model.noise.reset();

  double reward_sum = 0.0;
  std::size_t steps = 0;
  for (std::size_t t = 0; t + 1 < period.size(); ++t) {
    const double a = select_action(model.actor, x, model.noise.step(model.noise_rng));
    const CFState next = step_state(s, a, period.samples[t + 1].v_lead, period.dt);
    const bool collided = next.gap <= 0.0;
    const double r = step_reward(model.config.reward_mode, next, period.samples[t + 1], collided);
    window.push(next);
    Eigen::VectorXd x_next = window.encode();
    model.replay.push({x, a, r, x_next, collided});
    reward_sum += r;
    ++steps;

    const auto& cfg = model.config;
    if (model.replay.size() >= std::max(cfg.replay_start, std::size_t{1})) {
      const auto batch = model.replay.sample(cfg.minibatch, model.replay_rng);
      train_step(model, batch);
    }
    if (collided) break;
    s = next;
    x = std::move(x_next);
  }
  return {reward_sum, steps};
}

TrainResult run_training(DdpgModel model, const std::vector<CFPeriod>& calibration,
                         const std::vector<CFPeriod>& validation, int episodes, const EpisodeObserver& observer) {
  if (calibration.empty()) throw Error(ErrorCode::kInsufficientData, "training needs calibration periods");

  auto score = [&](const DdpgModel& m) {
    const Policy pi = m.policy();
    const double train_err = evaluate_policy(pi, calibration).spacing;
    const double test_err = validation.empty() ? 0.0 : evaluate_policy(pi, validation).spacing;
    return std::pair{train_err, test_err};
  };

  TrainResult result;
  const auto [train0, test0] = score(model);
  result.initial_train_rmspe = train0;
  result.initial_test_rmspe = test0;
  result.best_score = train0 + test0;
  result.best_episode = 0;
  Snapshot best = take_snapshot(model);

  for (int ep = 1; ep <= episodes; ++ep) {
    if (observer) observer(ep, model);
    double reward_sum = 0.0;
    std::size_t steps = 0;
    for (const auto& period : calibration) {
      const auto [r, n] = explore_period(model, period);
      reward_sum += r;
      steps += n;
    }
    const auto [train_err, test_err] = score(model);
    result.curves.push_back({ep, steps ? reward_sum / static_cast<double>(steps) : 0.0, train_err, test_err});
    if (train_err + test_err < result.best_score) {
      result.best_score = train_err + test_err;
      result.best_episode = ep;
      best = take_snapshot(model);
    }
  }
  restore(model, best);
  result.model = std::move(model);
  return result;
}

}  // namespace

TrainResult train(const std::vector<CFPeriod>& calibration, const std::vector<CFPeriod>& validation,
                  const TrainConfig& config, const EpisodeObserver& observer) {
  return run_training(DdpgModel::create(config), calibration, validation, config.episodes, observer);
}

TrainResult retrain(DdpgModel model, const std::vector<CFPeriod>& calibration,
                    const std::vector<CFPeriod>& validation, const TrainConfig& config,
                    const EpisodeObserver& observer) {
  config.validate();
  model.replay.clear();
  model.noise.reset();
  model.noise_rng = Rng(derive_seed(config.seed, SeedStream::kNoise));
  model.replay_rng = Rng(derive_seed(config.seed, SeedStream::kReplay));
  return run_training(std::move(model), calibration, validation, config.episodes, observer);
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const DdpgModel& m) {
  return {{"config", to_json(m.config)},
          {"actor", to_json(m.actor)},
          {"critic", to_json(m.critic)},
          {"target_actor", to_json(m.target_actor)},
          {"target_critic", to_json(m.target_critic)}};
}

DdpgModel ddpg_model_from_json(const nlohmann::json& j) {
  try {
    DdpgModel m = DdpgModel::create(train_config_from_json(j.at("config")));
    m.actor = dense_net_from_json(j.at("actor"));
    m.critic = dense_net_from_json(j.at("critic"));
    m.target_actor = j.contains("target_actor") ? dense_net_from_json(j.at("target_actor")) : m.actor;
    m.target_critic = j.contains("target_critic") ? dense_net_from_json(j.at("target_critic")) : m.critic;
    const int in = 3 * m.config.rt_window;
    if (m.actor.input_dim() != in || m.critic.input_dim() != in + 1 || !m.target_actor.same_shape(m.actor) ||
        !m.target_critic.same_shape(m.critic)) {
      throw Error(ErrorCode::kFormat, "DDPG networks do not match the stored configuration");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("DDPG model JSON: ") + e.what());
  }
}

}  // namespace cfrl
