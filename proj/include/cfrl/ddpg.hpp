#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cfrl/kinematics.hpp"
#include "cfrl/neuralnet.hpp"
#include "cfrl/random.hpp"

namespace cfrl {

enum class RewardMode { kSpacing, kSpeed };

const char* to_string(RewardMode mode);
RewardMode reward_mode_from_string(const std::string& name);

inline constexpr double kRewardErrorFloor = 1e-3;
inline constexpr double kRewardErrorCeil = 1e3;
// Observed speeds/gaps below these are raised before forming the relative
// error, since stopped traffic has v_obs = 0.
inline constexpr double kRewardSpeedFloor = 1.0;  // m/s
inline constexpr double kRewardGapFloor = 1.0;    // m

/// -ln(e), e = |sim - obs| / obs clipped to [1e-3, 1e3]. Throws
/// kInvalidObservation when obs <= 0.
double reward(double sim, double obs);

/// Reward bounds implied by the clip: +-ln(1000).
double max_reward();
double min_reward();

/// Dimensionless network inputs.
struct StateScale {
  double v = 30.0;
  double dv = 10.0;
  double gap = 100.0;
};

/// Network input built from the last `window` states (oldest first). A window
/// of 1 is the instantaneous state; 10 covers 1 s at 0.1 s steps. Before the
/// window fills it is padded with the episode's initial state.
class InputWindow {
 public:
  explicit InputWindow(int window = 1, StateScale scale = {});

  void reset(const CFState& initial);
  void push(const CFState& s);
  Eigen::VectorXd encode() const;

  int window() const { return window_; }
  int dim() const { return 3 * window_; }

 private:
  int window_;
  StateScale scale_;
  std::deque<CFState> states_;
};

struct TrainConfig {
  double learning_rate = 5e-4;
  double gamma = 0.9;
  std::size_t minibatch = 256;
  std::size_t replay_start = 7000;
  std::size_t replay_capacity = 10000;
  double tau = 0.01;
  int episodes = 60;
  double ou_theta = 0.15;
  double ou_sigma = 0.2;
  RewardMode reward_mode = RewardMode::kSpacing;
  int rt_window = 1;
  int hidden = 0;  // 0 selects 30 for instantaneous input, 100 for windowed input
  std::uint64_t seed = 0;
  StateScale scale;

  int hidden_width() const { return hidden > 0 ? hidden : (rt_window > 1 ? 100 : 30); }
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct Transition {
  Eigen::VectorXd s;
  double a = 0.0;
  double r = 0.0;
  Eigen::VectorXd s_next;
  bool terminal = false;
};

/// Fixed-capacity FIFO of transitions; the oldest entry is overwritten first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10000);

  void push(Transition t);
  void clear();
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  /// i = 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const;
  /// Uniform sampling with replacement.
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> ring_;
  std::size_t head_ = 0;  // next write slot
  std::size_t size_ = 0;
};

/// Ornstein-Uhlenbeck exploration noise with unit time step and zero mean.
class OUNoise {
 public:
  OUNoise(double theta = 0.15, double sigma = 0.2) : theta_(theta), sigma_(sigma) {}

  double step(Rng& rng);
  /// Deterministic update given the standard normal draw.
  double step_with(double gaussian);
  void reset(double x = 0.0) { x_ = x; }
  double value() const { return x_; }
  double theta() const { return theta_; }
  double sigma() const { return sigma_; }

 private:
  double theta_;
  double sigma_;
  double x_ = 0.0;
};

/// clamp(3 * tanh_output + noise, -3, 3)
double scale_action(double tanh_output, double noise);
double select_action(const DenseNet& actor, const Eigen::VectorXd& input, double noise);

struct DdpgModel {
  TrainConfig config;
  DenseNet actor;
  DenseNet critic;
  DenseNet target_actor;
  DenseNet target_critic;
  AdamState actor_opt;
  AdamState critic_opt;
  ReplayBuffer replay;
  OUNoise noise;
  Rng noise_rng;
  Rng replay_rng;
  long updates = 0;

  /// Fresh model: random mains, targets copied from them, empty replay.
  static DdpgModel create(const TrainConfig& cfg);

  InputWindow make_window() const { return InputWindow(config.rt_window, config.scale); }
  /// Greedy (noise-free) policy; resets its input window at step 0.
  Policy policy() const;
};

/// y_i = r_i + gamma * Q'(s'_i, mu'(s'_i)), or y_i = r_i for terminal transitions.
Eigen::VectorXd critic_targets(std::span<const Transition* const> batch, const DdpgModel& model);

struct TrainStepStats {
  double critic_loss = 0.0;
  double mean_q = 0.0;
};

/// One critic update, one actor update and the soft target update.
TrainStepStats train_step(DdpgModel& model, std::span<const Transition* const> batch);

/// Critic-only Adam step on the squared error to fixed targets `y`.
double critic_update(DdpgModel& model, std::span<const Transition* const> batch, const Eigen::VectorXd& y);
void actor_update(DdpgModel& model, std::span<const Transition* const> batch);
void update_targets(DdpgModel& model);

struct EpisodeRecord {
  int episode = 0;
  double reward_mean = 0.0;
  double rmspe_train = 0.0;
  double rmspe_test = 0.0;
};

struct TrainResult {
  DdpgModel model;  // networks from the best snapshot
  std::vector<EpisodeRecord> curves;
  int best_episode = 0;  // 0 = the starting networks
  double best_score = 0.0;
  double initial_train_rmspe = 0.0;
  double initial_test_rmspe = 0.0;
};

/// Called at the start of every training episode (1-based) with the model
/// as it is about to explore.
using EpisodeObserver = std::function<void(int episode, const DdpgModel& model)>;

/// Full training loop. Each episode simulates every calibration period in
/// order with exploration noise, learning once the replay holds
/// `replay_start` transitions. The returned networks are the end-of-episode
/// snapshot (or the starting networks) with the smallest train + test spacing
/// RMSPE.
TrainResult train(const std::vector<CFPeriod>& calibration, const std::vector<CFPeriod>& validation,
                  const TrainConfig& config, const EpisodeObserver& observer = {});

/// Continues training an existing model on new data after clearing its replay.
/// Weights and optimiser moments are kept; noise and sampling streams are
/// re-seeded from `config.seed`.
TrainResult retrain(DdpgModel model, const std::vector<CFPeriod>& calibration,
                    const std::vector<CFPeriod>& validation, const TrainConfig& config,
                    const EpisodeObserver& observer = {});

nlohmann::json to_json(const DdpgModel& model);
DdpgModel ddpg_model_from_json(const nlohmann::json& j);

}  // namespace cfrl
