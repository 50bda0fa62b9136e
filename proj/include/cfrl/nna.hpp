#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfrl/ddpg.hpp"
#include "cfrl/neuralnet.hpp"

namespace cfrl {

struct NNaConfig {
  int hidden = 30;
  int epochs = 100;
  std::size_t minibatch = 256;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  StateScale scale;
};

struct AccelSample {
  CFState state;
  double accel = 0.0;
};

/// Every (state, recorded acceleration) pair of the periods.
std::vector<AccelSample> acceleration_samples(const std::vector<CFPeriod>& periods);

/// Feed-forward acceleration regressor with the DDPG actor's shape
/// (3 -> hidden ReLU -> 1 tanh, scaled to +-3 m/s^2).
class NNaModel {
 public:
  NNaModel() = default;
  NNaModel(DenseNet net, StateScale scale) : net_(std::move(net)), scale_(scale) {}

  static NNaModel untrained(const NNaConfig& cfg);

  double predict(const CFState& s) const;
  /// Mean squared acceleration error over `samples`.
  double loss(const std::vector<AccelSample>& samples) const;
  Policy policy() const;

  const DenseNet& net() const { return net_; }
  DenseNet& net() { return net_; }
  const StateScale& scale() const { return scale_; }

 private:
  DenseNet net_;
  StateScale scale_;
};

struct NNaFit {
  NNaModel model;
  std::vector<double> loss_history;  // training loss before epoch 1, then after each epoch
};

/// Minibatch Adam on the mean squared acceleration error. Throws
/// kInsufficientData with fewer samples than one minibatch and kDivergence
/// on a non-finite loss.
NNaFit nna_fit(const std::vector<AccelSample>& samples, const NNaConfig& cfg);

nlohmann::json to_json(const NNaModel& m);
NNaModel nna_model_from_json(const nlohmann::json& j);

}  // namespace cfrl
