#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cfrl/random.hpp"

namespace cfrl {

enum class Activation { kIdentity, kRelu, kTanh };

const char* to_string(Activation act);
Activation activation_from_string(const std::string& name);

struct LayerSpec {
  int in = 0;
  int out = 0;
  Activation activation = Activation::kIdentity;
  std::size_t weight_offset = 0;  // into the flat parameter vector
  std::size_t bias_offset = 0;
};

/// Per-layer inputs and post-activation outputs of a batched forward pass.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> outputs;
};

/// Fully connected network. All parameters live in one flat vector so target
/// tracking and Adam operate on a single contiguous buffer; layer weights are
/// exposed as (out x in) column-major views into it.
class DenseNet {
 public:
  DenseNet() = default;

  /// `dims` = {input, hidden..., output}; parameters start at zero.
  DenseNet(const std::vector<int>& dims, Activation hidden, Activation output);

  /// Hidden layers uniform in +-1/sqrt(fan_in), output layer uniform in +-3e-3.
  static DenseNet make(const std::vector<int>& dims, Activation hidden, Activation output, Rng& rng);

  int input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
  int output_dim() const { return layers_.empty() ? 0 : layers_.back().out; }
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t num_params() const { return static_cast<std::size_t>(params_.size()); }
  const LayerSpec& layer(std::size_t l) const { return layers_.at(l); }

  Eigen::Map<Eigen::MatrixXd> weights(std::size_t l);
  Eigen::Map<const Eigen::MatrixXd> weights(std::size_t l) const;
  Eigen::Map<Eigen::VectorXd> bias(std::size_t l);
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t l) const;

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;

  /// Columns of `x` are samples. Fills `cache` for a subsequent backward pass.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x, ForwardCache* cache = nullptr) const;

  /// Reverse pass for a cached batch. Returns dL/dparams summed over the
  /// batch; writes dL/dx (one column per sample) when `grad_input` is set.
  Eigen::VectorXd backward_batch(const ForwardCache& cache, const Eigen::MatrixXd& grad_output,
                                 Eigen::MatrixXd* grad_input = nullptr) const;

  struct Gradients {
    Eigen::VectorXd params;
    Eigen::VectorXd input;
  };
  Gradients backward(const Eigen::VectorXd& x, const Eigen::VectorXd& grad_output) const;

  bool same_shape(const DenseNet& other) const;
  bool all_finite() const { return params_.allFinite(); }

 private:
  void check_input_rows(Eigen::Index rows) const;

  std::vector<LayerSpec> layers_;
  Eigen::VectorXd params_;
};

/// target <- tau * source + (1 - tau) * target
void soft_update(DenseNet& target, const DenseNet& source, double tau);

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;

  AdamState() = default;
  AdamState(std::size_t n_params, AdamConfig cfg)
      : config(cfg), m(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params))),
        v(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params))) {}
};

/// One bias-corrected Adam descent step. Throws kDivergence on non-finite
/// gradients (parameters and state are left untouched in that case).
void adam_step(AdamState& state, Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads);

nlohmann::json to_json(const DenseNet& net);
DenseNet dense_net_from_json(const nlohmann::json& j);

}  // namespace cfrl
