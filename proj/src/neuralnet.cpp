#include "cfrl/neuralnet.hpp"

#include <cmath>
#include <string>

#include "cfrl/error.hpp"

namespace cfrl {

namespace {

constexpr int kSerializationVersion = 1;
constexpr double kOutputInitRange = 3e-3;

void apply_activation(Activation act, Eigen::MatrixXd& z) {
  switch (act) {
    case Activation::kIdentity: break;
    case Activation::kRelu: z = z.cwiseMax(0.0); break;
    case Activation::kTanh: z = z.array().tanh().matrix(); break;
  }
}

// d(activation)/d(pre-activation), expressed through the activation output.
Eigen::MatrixXd activation_derivative(Activation act, const Eigen::MatrixXd& y) {
  switch (act) {
    case Activation::kIdentity: return Eigen::MatrixXd::Ones(y.rows(), y.cols());
    case Activation::kRelu: return (y.array() > 0.0).cast<double>().matrix();
    case Activation::kTanh: return (1.0 - y.array().square()).matrix();
  }
  return Eigen::MatrixXd::Ones(y.rows(), y.cols());
}

}  // namespace

const char* to_string(Activation act) {
  switch (act) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw Error(ErrorCode::kFormat, "unknown activation '" + name + "'");
}

DenseNet::DenseNet(const std::vector<int>& dims, Activation hidden, Activation output) {
  if (dims.size() < 2) throw Error(ErrorCode::kShape, "network needs at least input and output dims");
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (dims[l] <= 0 || dims[l + 1] <= 0) throw Error(ErrorCode::kShape, "layer dims must be positive");
    LayerSpec spec;
    spec.in = dims[l];
    spec.out = dims[l + 1];
    spec.activation = (l + 2 == dims.size()) ? output : hidden;
    spec.weight_offset = offset;
    offset += static_cast<std::size_t>(spec.in) * static_cast<std::size_t>(spec.out);
    spec.bias_offset = offset;
    offset += static_cast<std::size_t>(spec.out);
    layers_.push_back(spec);
  }
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
}

DenseNet DenseNet::make(const std::vector<int>& dims, Activation hidden, Activation output, Rng& rng) {
  DenseNet net(dims, hidden, output);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const bool last = l + 1 == net.num_layers();
    const double range = last ? kOutputInitRange : 1.0 / std::sqrt(static_cast<double>(net.layers_[l].in));
    std::uniform_real_distribution<double> u(-range, range);
    auto w = net.weights(l);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = u(rng);
    auto b = net.bias(l);
    for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = u(rng);
  }
  return net;
}

Eigen::Map<Eigen::MatrixXd> DenseNet::weights(std::size_t l) {
  const auto& s = layers_.at(l);
  return {params_.data() + s.weight_offset, s.out, s.in};
}

Eigen::Map<const Eigen::MatrixXd> DenseNet::weights(std::size_t l) const {
  const auto& s = layers_.at(l);
  return {params_.data() + s.weight_offset, s.out, s.in};
}

Eigen::Map<Eigen::VectorXd> DenseNet::bias(std::size_t l) {
  const auto& s = layers_.at(l);
  return {params_.data() + s.bias_offset, s.out};
}

Eigen::Map<const Eigen::VectorXd> DenseNet::bias(std::size_t l) const {
  const auto& s = layers_.at(l);
  return {params_.data() + s.bias_offset, s.out};
}

void DenseNet::check_input_rows(Eigen::Index rows) const {
  if (layers_.empty()) throw Error(ErrorCode::kShape, "network has no layers");
  if (rows != input_dim()) {
    throw Error(ErrorCode::kShape, "input has " + std::to_string(rows) + " rows, network expects " +
                                       std::to_string(input_dim()));
  }
}

Eigen::VectorXd DenseNet::forward(const Eigen::VectorXd& x) const {
  check_input_rows(x.size());
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = weights(l) * a;
    z.colwise() += bias(l);
    apply_activation(layers_[l].activation, z);
    a = std::move(z);
  }
  return a.col(0);
}

Eigen::MatrixXd DenseNet::forward_batch(const Eigen::MatrixXd& x, ForwardCache* cache) const {
  check_input_rows(x.rows());
  if (cache) {
    cache->inputs.resize(layers_.size());
    cache->outputs.resize(layers_.size());
  }
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = weights(l) * a;
    z.colwise() += bias(l);
    apply_activation(layers_[l].activation, z);
    if (cache) {
      cache->inputs[l] = std::move(a);
      cache->outputs[l] = z;
    }
    a = std::move(z);
  }
  return a;
}

Eigen::VectorXd DenseNet::backward_batch(const ForwardCache& cache, const Eigen::MatrixXd& grad_output,
                                         Eigen::MatrixXd* grad_input) const {
  if (cache.outputs.size() != layers_.size()) throw Error(ErrorCode::kShape, "forward cache does not match network");
  const auto& last = cache.outputs.back();
  if (grad_output.rows() != last.rows() || grad_output.cols() != last.cols()) {
    throw Error(ErrorCode::kShape, "output gradient shape does not match the cached forward pass");
  }
  Eigen::VectorXd grads = Eigen::VectorXd::Zero(params_.size());
  Eigen::MatrixXd delta = grad_output;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& spec = layers_[li];
    delta = delta.cwiseProduct(activation_derivative(spec.activation, cache.outputs[li]));
    Eigen::Map<Eigen::MatrixXd>(grads.data() + spec.weight_offset, spec.out, spec.in) =
        delta * cache.inputs[li].transpose();
    Eigen::Map<Eigen::VectorXd>(grads.data() + spec.bias_offset, spec.out) = delta.rowwise().sum();
    if (li > 0 || grad_input) delta = weights(li).transpose() * delta;
  }
  if (grad_input) *grad_input = std::move(delta);
  return grads;
}

DenseNet::Gradients DenseNet::backward(const Eigen::VectorXd& x, const Eigen::VectorXd& grad_output) const {
  ForwardCache cache;
  forward_batch(x, &cache);
  Eigen::MatrixXd grad_in;
  Gradients g;
  g.params = backward_batch(cache, grad_output, &grad_in);
  g.input = grad_in.col(0);
  return g;
}

bool DenseNet::same_shape(const DenseNet& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].in != other.layers_[l].in || layers_[l].out != other.layers_[l].out ||
        layers_[l].activation != other.layers_[l].activation) {
      return false;
    }
  }
  return true;
}

void soft_update(DenseNet& target, const DenseNet& source, double tau) {
  if (!target.same_shape(source)) throw Error(ErrorCode::kShape, "soft update between different shapes");
  target.params() = tau * source.params() + (1.0 - tau) * target.params();
}

void adam_step(AdamState& state, Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw Error(ErrorCode::kShape, "Adam state, parameters and gradients differ in size");
  }
  if (!grads.allFinite()) throw Error(ErrorCode::kDivergence, "non-finite gradient in Adam step");
  const auto& c = state.config;
  ++state.step;
  state.m = c.beta1 * state.m + (1.0 - c.beta1) * grads;
  state.v = c.beta2 * state.v + (1.0 - c.beta2) * grads.cwiseProduct(grads);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  params.array() -= c.learning_rate * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + c.epsilon);
}

nlohmann::json to_json(const DenseNet& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& spec = net.layer(l);
    const auto w = net.weights(l);
    std::vector<double> row_major;
    row_major.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) row_major.push_back(w(r, c));
    const auto b = net.bias(l);
    layers.push_back({{"in", spec.in},
                      {"out", spec.out},
                      {"activation", to_string(spec.activation)},
                      {"weights", row_major},
                      {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
  }
  return {{"format", "cfrl-densenet"}, {"version", kSerializationVersion}, {"layers", layers}};
}

DenseNet dense_net_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != kSerializationVersion) {
      throw Error(ErrorCode::kFormat, "unsupported network format version");
    }
    const auto& layers = j.at("layers");
    if (layers.empty()) throw Error(ErrorCode::kFormat, "network has no layers");
    std::vector<int> dims{layers.front().at("in").get<int>()};
    std::vector<Activation> acts;
    for (const auto& l : layers) {
      if (l.at("in").get<int>() != dims.back()) throw Error(ErrorCode::kFormat, "layer dimensions do not chain");
      dims.push_back(l.at("out").get<int>());
      acts.push_back(activation_from_string(l.at("activation").get<std::string>()));
    }
    DenseNet typed(dims, acts.size() > 1 ? acts.front() : acts.back(), acts.back());
    for (std::size_t l = 0; l + 1 < acts.size(); ++l) {
      if (acts[l] != acts.front()) throw Error(ErrorCode::kFormat, "hidden layers must share one activation");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto w = layers[l].at("weights").get<std::vector<double>>();
      const auto b = layers[l].at("bias").get<std::vector<double>>();
      auto wm = typed.weights(l);
      auto bv = typed.bias(l);
      if (w.size() != static_cast<std::size_t>(wm.size()) || b.size() != static_cast<std::size_t>(bv.size())) {
        throw Error(ErrorCode::kFormat, "layer " + std::to_string(l) + " parameter count mismatch");
      }
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < wm.rows(); ++r)
        for (Eigen::Index c = 0; c < wm.cols(); ++c) wm(r, c) = w[k++];
      for (Eigen::Index r = 0; r < bv.size(); ++r) bv(r) = b[static_cast<std::size_t>(r)];
    }
    if (!typed.all_finite()) throw Error(ErrorCode::kFormat, "network parameters are not finite");
    return typed;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("network JSON: ") + e.what());
  }
}

}  // namespace cfrl
