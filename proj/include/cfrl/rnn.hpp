#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cfrl/ddpg.hpp"

namespace cfrl {

/// Elman cell: h' = ReLU(W_h h + W_i x + b_i), accel = clamp(W_o h' + b_o).
/// Parameters share one flat vector (W_i, W_h, b_i, W_o, b_o).
class RNNModel {
 public:
  static constexpr int kDefaultHidden = 60;

  RNNModel() = default;
  RNNModel(int input_dim, int hidden, StateScale scale = {});

  static RNNModel make(int input_dim, int hidden, Rng& rng, StateScale scale = {});

  int input_dim() const { return input_; }
  int hidden() const { return hidden_; }

  Eigen::Map<Eigen::MatrixXd> w_in();
  Eigen::Map<const Eigen::MatrixXd> w_in() const;
  Eigen::Map<Eigen::MatrixXd> w_hidden();
  Eigen::Map<const Eigen::MatrixXd> w_hidden() const;
  Eigen::Map<Eigen::VectorXd> b_in();
  Eigen::Map<const Eigen::VectorXd> b_in() const;
  Eigen::Map<Eigen::RowVectorXd> w_out();
  Eigen::Map<const Eigen::RowVectorXd> w_out() const;
  double& b_out() { return params_(params_.size() - 1); }
  double b_out() const { return params_(params_.size() - 1); }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  struct StepResult {
    Eigen::VectorXd h;
    double output = 0.0;  // W_o h' + b_o before clamping
    double accel = 0.0;
  };
  StepResult step(const Eigen::VectorXd& h, const Eigen::VectorXd& input) const;

  /// Reverse pass through one step given the upstream gradients of h' and of
  /// the pre-clamp output. Adds the parameter gradient to `param_grads`.
  struct StepGradients {
    Eigen::VectorXd h;      // d/d h
    Eigen::VectorXd input;  // d/d input
  };
  StepGradients step_backward(const Eigen::VectorXd& h, const Eigen::VectorXd& input, const StepResult& fwd,
                              const Eigen::VectorXd& grad_h_next, double grad_output,
                              Eigen::VectorXd& param_grads) const;

  Eigen::VectorXd encode(const CFState& s) const;
  const StateScale& scale() const { return scale_; }

  /// Closed-loop policy; the hidden state resets at step 0.
  Policy policy() const;

 private:
  int input_ = 0;
  int hidden_ = 0;
  StateScale scale_;
  Eigen::VectorXd params_;
};

/// Forward/backward through a closed-loop rollout segment. The follower state
/// follows the point-mass update driven by the cell's acceleration; the loss
/// is the mean over steps of (gap - gap_obs)^2 / gap_obs^2.
struct SegmentResult {
  double loss = 0.0;
  Eigen::VectorXd grad;  // d loss / d params
  CFState final_state;
  Eigen::VectorXd final_hidden;
  std::size_t steps = 0;
  bool collided = false;
};

/// Simulates samples [begin, begin + length) of `period` starting from
/// `start` (the simulated state at `begin`) and hidden state `h0`. Both are
/// treated as constants. Gradients are computed when `with_grad` is set.
SegmentResult rnn_segment(const RNNModel& model, const CFPeriod& period, std::size_t begin, std::size_t length,
                          const CFState& start, const Eigen::VectorXd& h0, bool with_grad);

/// Mean per-step normalised squared spacing error of closed-loop rollouts.
double rnn_objective(const RNNModel& model, const std::vector<CFPeriod>& periods);

struct RNNConfig {
  int hidden = RNNModel::kDefaultHidden;
  int epochs = 30;
  std::size_t truncation = 50;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  StateScale scale;
};

struct RNNFit {
  RNNModel model;  // best epoch (epoch 0 = initial weights)
  std::vector<double> objective_history;
  int best_epoch = 0;
};

/// Truncated BPTT with Adam. Throws kInsufficientData on an empty dataset and
/// kDivergence on a non-finite loss.
RNNFit rnn_train(const std::vector<CFPeriod>& periods, const RNNConfig& cfg);

nlohmann::json to_json(const RNNModel& m);
RNNModel rnn_model_from_json(const nlohmann::json& j);

}  // namespace cfrl
