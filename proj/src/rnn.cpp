#include "cfrl/rnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "cfrl/error.hpp"

namespace cfrl {

RNNModel::RNNModel(int input_dim, int hidden, StateScale scale) : input_(input_dim), hidden_(hidden), scale_(scale) {
  if (input_ <= 0 || hidden_ <= 0) throw Error(ErrorCode::kShape, "RNN dimensions must be positive");
  const Eigen::Index n = static_cast<Eigen::Index>(hidden_) * (input_ + hidden_ + 2) + 1;
  params_ = Eigen::VectorXd::Zero(n);
}

RNNModel RNNModel::make(int input_dim, int hidden, Rng& rng, StateScale scale) {
  RNNModel m(input_dim, hidden, scale);
  auto fill = [&rng](auto&& block, double range) {
    std::uniform_real_distribution<double> u(-range, range);
    for (Eigen::Index i = 0; i < block.size(); ++i) block.data()[i] = u(rng);
  };
  fill(m.w_in(), 1.0 / std::sqrt(static_cast<double>(input_dim)));
  fill(m.w_hidden(), 0.5 / std::sqrt(static_cast<double>(hidden)));
  fill(m.b_in(), 1.0 / std::sqrt(static_cast<double>(input_dim)));
  fill(m.w_out(), 3e-3);
  return m;
}

Eigen::Map<Eigen::MatrixXd> RNNModel::w_in() { return {params_.data(), hidden_, input_}; }
Eigen::Map<const Eigen::MatrixXd> RNNModel::w_in() const { return {params_.data(), hidden_, input_}; }

Eigen::Map<Eigen::MatrixXd> RNNModel::w_hidden() {
  return {params_.data() + static_cast<std::ptrdiff_t>(hidden_) * input_, hidden_, hidden_};
}
Eigen::Map<const Eigen::MatrixXd> RNNModel::w_hidden() const {
  return {params_.data() + static_cast<std::ptrdiff_t>(hidden_) * input_, hidden_, hidden_};
}

Eigen::Map<Eigen::VectorXd> RNNModel::b_in() {
  return {params_.data() + static_cast<std::ptrdiff_t>(hidden_) * (input_ + hidden_), hidden_};
}
Eigen::Map<const Eigen::VectorXd> RNNModel::b_in() const {
  return {params_.data() + static_cast<std::ptrdiff_t>(hidden_) * (input_ + hidden_), hidden_};
}

Eigen::Map<Eigen::RowVectorXd> RNNModel::w_out() {
  return {params_.data() + static_cast<std::ptrdiff_t>(hidden_) * (input_ + hidden_ + 1), hidden_};
}
Eigen::Map<const Eigen::RowVectorXd> RNNModel::w_out() const {
  return {params_.data() + static_cast<std::ptrdiff_t>(hidden_) * (input_ + hidden_ + 1), hidden_};
}

RNNModel::StepResult RNNModel::step(const Eigen::VectorXd& h, const Eigen::VectorXd& input) const {
  if (h.size() != hidden_ || input.size() != input_) {
    throw Error(ErrorCode::kShape, "RNN step: hidden or input size mismatch");
  }
  StepResult r;
  r.h = (w_hidden() * h + w_in() * input + b_in()).cwiseMax(0.0);
  r.output = w_out().dot(r.h) + b_out();
  if (!std::isfinite(r.output)) throw Error(ErrorCode::kDivergence, "RNN output is not finite");
  r.accel = clamp_action(r.output);
  return r;
}

RNNModel::StepGradients RNNModel::step_backward(const Eigen::VectorXd& h, const Eigen::VectorXd& input,
                                                const StepResult& fwd, const Eigen::VectorXd& grad_h_next,
                                                double grad_output, Eigen::VectorXd& param_grads) const {
  if (param_grads.size() != params_.size()) param_grads = Eigen::VectorXd::Zero(params_.size());
  RNNModel g(input_, hidden_, scale_);
  g.params_.swap(param_grads);
  g.w_out() += grad_output * fwd.h.transpose();
  g.b_out() += grad_output;
  const Eigen::VectorXd g_hn = grad_h_next + grad_output * w_out().transpose();
  const Eigen::VectorXd g_pre = g_hn.cwiseProduct((fwd.h.array() > 0.0).cast<double>().matrix());
  g.w_hidden() += g_pre * h.transpose();
  g.w_in() += g_pre * input.transpose();
  g.b_in() += g_pre;
  g.params_.swap(param_grads);
  return {w_hidden().transpose() * g_pre, w_in().transpose() * g_pre};
}

Eigen::VectorXd RNNModel::encode(const CFState& s) const {
  if (input_ != 3) throw Error(ErrorCode::kShape, "state encoding needs a 3-input cell");
  Eigen::VectorXd x(3);
  x << s.v_follow / scale_.v, s.dv / scale_.dv, s.gap / scale_.gap;
  return x;
}

Policy RNNModel::policy() const {
  auto h = std::make_shared<Eigen::VectorXd>(Eigen::VectorXd::Zero(hidden_));
  return [model = *this, h](std::size_t step, const CFState& s) {
    if (step == 0) h->setZero();
    auto r = model.step(*h, model.encode(s));
    *h = std::move(r.h);
    return r.accel;
  };
}

// ---------------------------------------------------------------------------

SegmentResult rnn_segment(const RNNModel& model, const CFPeriod& period, std::size_t begin, std::size_t length,
                          const CFState& start, const Eigen::VectorXd& h0, bool with_grad) {
  if (begin + 1 >= period.size()) throw Error(ErrorCode::kEmptyPeriod, "segment starts at the last sample");
  length = std::min(length, period.size() - 1 - begin);
  const double dt = period.dt;
  const StateScale& sc = model.scale();

  struct Tape {
    Eigen::VectorXd input, h_prev, h_next;
    CFState s, s_next;
    double output = 0.0;
    bool floor_active = false;
  };
  std::vector<Tape> tape;
  tape.reserve(length);

  SegmentResult res;
  CFState s = start;
  Eigen::VectorXd h = h0;
  double loss = 0.0;
  for (std::size_t k = 0; k < length; ++k) {
    const std::size_t t = begin + k;
    Tape rec;
    rec.input = model.encode(s);
    rec.h_prev = h;
    const auto out = model.step(h, rec.input);
    rec.h_next = out.h;
    rec.output = out.output;
    rec.s = s;
    rec.s_next = step_state(s, out.accel, period.samples[t + 1].v_lead, dt);
    rec.floor_active = !(s.v_follow + out.accel * dt > 0.0);
    const double obs = period.samples[t + 1].gap;
    const double e = (rec.s_next.gap - obs) / obs;
    loss += e * e;
    s = rec.s_next;
    h = out.h;
    tape.push_back(std::move(rec));
    if (s.gap <= 0.0) {
      res.collided = true;
      break;
    }
  }
  res.steps = tape.size();
  const double inv_n = 1.0 / static_cast<double>(res.steps);
  res.loss = loss * inv_n;
  res.final_state = s;
  res.final_hidden = h;
  if (!std::isfinite(res.loss)) throw Error(ErrorCode::kDivergence, "RNN segment loss is not finite");
  if (!with_grad) return res;

  Eigen::VectorXd g = Eigen::VectorXd::Zero(model.params().size());
  // Adjoints of the state after the current step and of the hidden state it produced.
  double g_v = 0.0, g_dv = 0.0, g_gap = 0.0;
  Eigen::VectorXd g_h = Eigen::VectorXd::Zero(model.hidden());
  for (std::size_t k = tape.size(); k-- > 0;) {
    const Tape& rec = tape[k];
    const double obs = period.samples[begin + k + 1].gap;
    g_gap += 2.0 * (rec.s_next.gap - obs) / (obs * obs) * inv_n;

    // gap' = gap + dt/2 (dv + dv'),  dv' = v_lead' - v',  v' = max(0, v + a dt)
    const double g_dv_next = g_dv + 0.5 * dt * g_gap;
    const double g_v_next = g_v - g_dv_next;
    double g_v_cur = 0.0;
    double g_a = 0.0;
    if (!rec.floor_active) {
      g_v_cur = g_v_next;
      g_a = g_v_next * dt;
    }
    double g_dv_cur = 0.5 * dt * g_gap;
    double g_gap_cur = g_gap;

    const double g_out = std::abs(rec.output) < kMaxAcceleration ? g_a : 0.0;
    const RNNModel::StepResult fwd{rec.h_next, rec.output, 0.0};
    const auto back = model.step_backward(rec.h_prev, rec.input, fwd, g_h, g_out, g);
    g_h = back.h;
    g_v_cur += back.input(0) / sc.v;
    g_dv_cur += back.input(1) / sc.dv;
    g_gap_cur += back.input(2) / sc.gap;

    g_v = g_v_cur;
    g_dv = g_dv_cur;
    g_gap = g_gap_cur;
  }
  res.grad = std::move(g);
  return res;
}

double rnn_objective(const RNNModel& model, const std::vector<CFPeriod>& periods) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : periods) {
    const auto r = rnn_segment(model, p, 0, p.size() - 1, p.state_at(0), Eigen::VectorXd::Zero(model.hidden()),
                               false);
    sum += r.loss * static_cast<double>(r.steps);
    n += r.steps;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

RNNFit rnn_train(const std::vector<CFPeriod>& periods, const RNNConfig& cfg) {
  if (periods.empty()) throw Error(ErrorCode::kInsufficientData, "RNN training needs at least one period");
  if (cfg.truncation == 0) throw Error(ErrorCode::kInvalidArgument, "BPTT truncation must be positive");
  Rng rng(derive_seed(cfg.seed, SeedStream::kInit));
  RNNModel model = RNNModel::make(3, cfg.hidden, rng, cfg.scale);
  AdamState opt(static_cast<std::size_t>(model.params().size()), {.learning_rate = cfg.learning_rate});

  RNNFit fit;
  fit.model = model;
  fit.objective_history.push_back(rnn_objective(model, periods));
  double best = fit.objective_history.back();

  std::vector<std::size_t> order(periods.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle(derive_seed(cfg.seed, SeedStream::kShuffle));
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle);
    for (std::size_t pi : order) {
      const CFPeriod& p = periods[pi];
      CFState s = p.state_at(0);
      Eigen::VectorXd h = Eigen::VectorXd::Zero(model.hidden());
      for (std::size_t begin = 0; begin + 1 < p.size(); begin += cfg.truncation) {
        const auto seg = rnn_segment(model, p, begin, cfg.truncation, s, h, true);
        adam_step(opt, model.params(), seg.grad);
        if (seg.collided) break;
        s = seg.final_state;
        h = seg.final_hidden;
      }
    }
    const double obj = rnn_objective(model, periods);
    if (!std::isfinite(obj)) throw Error(ErrorCode::kDivergence, "RNN objective is not finite");
    fit.objective_history.push_back(obj);
    if (obj < best) {
      best = obj;
      fit.best_epoch = epoch;
      fit.model = model;
    }
  }
  return fit;
}

nlohmann::json to_json(const RNNModel& m) {
  const auto& p = m.params();
  return {{"input", m.input_dim()},
          {"hidden", m.hidden()},
          {"layout", "w_in(col-major hidden x input), w_hidden(col-major), b_in, w_out, b_out"},
          {"params", std::vector<double>(p.data(), p.data() + p.size())},
          {"normalization", {{"v", m.scale().v}, {"dv", m.scale().dv}, {"gap", m.scale().gap}}}};
}

RNNModel rnn_model_from_json(const nlohmann::json& j) {
  try {
    const auto& n = j.at("normalization");
    RNNModel m(j.at("input").get<int>(), j.at("hidden").get<int>(),
               {n.at("v").get<double>(), n.at("dv").get<double>(), n.at("gap").get<double>()});
    const auto p = j.at("params").get<std::vector<double>>();
    if (p.size() != static_cast<std::size_t>(m.params().size())) {
      throw Error(ErrorCode::kFormat, "RNN parameter count mismatch");
    }
    m.params() = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("RNN model JSON: ") + e.what());
  }
}

}  // namespace cfrl
