#include "cfrl/nna.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfrl/error.hpp"

namespace cfrl {

namespace {

Eigen::VectorXd encode(const CFState& s, const StateScale& scale) {
  Eigen::VectorXd x(3);
  x << s.v_follow / scale.v, s.dv / scale.dv, s.gap / scale.gap;
  return x;
}

}  // namespace

std::vector<AccelSample> acceleration_samples(const std::vector<CFPeriod>& periods) {
  std::vector<AccelSample> out;
  for (const auto& p : periods) {
    for (std::size_t i = 0; i < p.size(); ++i) out.push_back({p.state_at(i), p.samples[i].a_follow});
  }
  return out;
}

NNaModel NNaModel::untrained(const NNaConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, SeedStream::kInit));
  return {DenseNet::make({3, cfg.hidden, 1}, Activation::kRelu, Activation::kTanh, rng), cfg.scale};
}

double NNaModel::predict(const CFState& s) const {
  return clamp_action(kMaxAcceleration * net_.forward(encode(s, scale_))(0));
}

double NNaModel::loss(const std::vector<AccelSample>& samples) const {
  if (samples.empty()) throw Error(ErrorCode::kInsufficientData, "loss over zero samples");
  double sum = 0.0;
  for (const auto& s : samples) {
    const double e = predict(s.state) - s.accel;
    sum += e * e;
  }
  return sum / static_cast<double>(samples.size());
}

Policy NNaModel::policy() const {
  return [model = *this](std::size_t, const CFState& s) { return model.predict(s); };
}

NNaFit nna_fit(const std::vector<AccelSample>& samples, const NNaConfig& cfg) {
  if (samples.size() < cfg.minibatch || cfg.minibatch == 0) {
    throw Error(ErrorCode::kInsufficientData, "NNa needs at least one full minibatch of samples");
  }
  NNaFit fit{NNaModel::untrained(cfg), {}};
  AdamState opt(fit.model.net().num_params(), {.learning_rate = cfg.learning_rate});
  Rng rng(derive_seed(cfg.seed, SeedStream::kShuffle));

  const auto n = samples.size();
  Eigen::MatrixXd x(3, static_cast<Eigen::Index>(n));
  Eigen::RowVectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    x.col(static_cast<Eigen::Index>(i)) = encode(samples[i].state, cfg.scale);
    y(static_cast<Eigen::Index>(i)) = samples[i].accel;
  }
  fit.loss_history.push_back(fit.model.loss(samples));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto mb = static_cast<Eigen::Index>(cfg.minibatch);
  Eigen::MatrixXd xb(3, mb);
  Eigen::RowVectorXd yb(mb);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start + cfg.minibatch <= n; start += cfg.minibatch) {
      for (Eigen::Index k = 0; k < mb; ++k) {
        const auto i = static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(k)]);
        xb.col(k) = x.col(i);
        yb(k) = y(i);
      }
      ForwardCache cache;
      const Eigen::MatrixXd out = fit.model.net().forward_batch(xb, &cache);
      const Eigen::RowVectorXd err = kMaxAcceleration * out.row(0) - yb;
      // d/d(out) of mean (3 out - y)^2
      const Eigen::MatrixXd grad = (2.0 * kMaxAcceleration / static_cast<double>(mb)) * err;
      adam_step(opt, fit.model.net().params(), fit.model.net().backward_batch(cache, grad));
    }
    const double l = fit.model.loss(samples);
    if (!std::isfinite(l)) throw Error(ErrorCode::kDivergence, "NNa training loss is not finite");
    fit.loss_history.push_back(l);
  }
  return fit;
}

nlohmann::json to_json(const NNaModel& m) {
  return {{"net", to_json(m.net())},
          {"normalization", {{"v", m.scale().v}, {"dv", m.scale().dv}, {"gap", m.scale().gap}}}};
}

NNaModel nna_model_from_json(const nlohmann::json& j) {
  try {
    const auto& n = j.at("normalization");
    DenseNet net = dense_net_from_json(j.at("net"));
    if (net.input_dim() != 3 || net.output_dim() != 1) throw Error(ErrorCode::kFormat, "NNa network must be 3 -> 1");
    return {std::move(net), {n.at("v").get<double>(), n.at("dv").get<double>(), n.at("gap").get<double>()}};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("NNa model JSON: ") + e.what());
  }
}

}  // namespace cfrl
