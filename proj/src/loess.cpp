#include "cfrl/loess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "cfrl/error.hpp"

namespace cfrl {

double tricube_weight(double u) {
  if (u < 0.0 || u > 1.0) return 0.0;
  const double c = 1.0 - u * u * u;
  return c * c * c;
}

LoessModel::LoessModel(std::vector<Point> x, std::vector<double> y, double span)
    : x_(std::move(x)), y_(std::move(y)), span_(span) {
  if (x_.size() != y_.size()) throw Error(ErrorCode::kLengthMismatch, "Loess inputs and targets differ in length");
  if (x_.size() < 2) throw Error(ErrorCode::kInsufficientData, "Loess needs at least 2 training points");
  if (!(span_ > 0.0 && span_ <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "Loess span must lie in (0, 1]");

  const auto n = static_cast<double>(x_.size());
  for (int d = 0; d < 3; ++d) {
    double sum = 0.0;
    for (const auto& p : x_) sum += p[d];
    mean_[d] = sum / n;
    double var = 0.0;
    for (const auto& p : x_) var += (p[d] - mean_[d]) * (p[d] - mean_[d]);
    const double sd = std::sqrt(var / n);
    scale_[d] = sd > 0.0 ? sd : 1.0;
  }
  z_.reserve(x_.size());
  for (const auto& p : x_) z_.push_back(standardise(p));
}

LoessModel LoessModel::fit(const std::vector<CFPeriod>& periods, double span) {
  std::vector<Point> x;
  std::vector<double> y;
  for (const auto& p : periods) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const CFState s = p.state_at(i);
      x.push_back({s.v_follow, s.dv, s.gap});
      y.push_back(p.samples[i].a_follow);
    }
  }
  return LoessModel(std::move(x), std::move(y), span);
}

LoessModel::Point LoessModel::standardise(const Point& x) const {
  return {(x[0] - mean_[0]) / scale_[0], (x[1] - mean_[1]) / scale_[1], (x[2] - mean_[2]) / scale_[2]};
}

std::size_t LoessModel::neighbourhood() const {
  const auto k = static_cast<std::size_t>(std::ceil(span_ * static_cast<double>(y_.size()) - 1e-12));
  return std::clamp<std::size_t>(k, 1, y_.size());
}

LoessModel::Prediction LoessModel::predict_detail(const Point& x) const {
  if (y_.empty()) throw Error(ErrorCode::kInsufficientData, "Loess model is not trained");
  const Point q = standardise(x);
  const std::size_t n = y_.size();
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = z_[i][0] - q[0], b = z_[i][1] - q[1], c = z_[i][2] - q[2];
    dist[i] = std::sqrt(a * a + b * b + c * c);
  }
  const std::size_t k = neighbourhood();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k - 1), idx.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  idx.resize(k);
  const double max_dist = dist[idx[k - 1]];
  for (std::size_t i : idx) {
    if (dist[i] > max_dist) throw Error(ErrorCode::kInvalidArgument, "neighbour selection failed");
  }

  Prediction out;
  if (!(max_dist > 0.0)) {
    // Every neighbour coincides with the query; average all coincident points.
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (dist[i] == 0.0) {
        sum += y_[i];
        ++count;
      }
    }
    out.fallback = true;
    out.raw = sum / static_cast<double>(count);
    out.value = clamp_action(out.raw);
    return out;
  }

  const auto m = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd design(m, 4);
  Eigen::VectorXd rhs(m);
  double w_sum = 0.0, wy_sum = 0.0;
  for (Eigen::Index r = 0; r < m; ++r) {
    const std::size_t i = idx[static_cast<std::size_t>(r)];
    const double w = tricube_weight(dist[i] / max_dist);
    const double sw = std::sqrt(w);
    design(r, 0) = sw;
    design(r, 1) = sw * (z_[i][0] - q[0]);
    design(r, 2) = sw * (z_[i][1] - q[1]);
    design(r, 3) = sw * (z_[i][2] - q[2]);
    rhs(r) = sw * y_[i];
    w_sum += w;
    wy_sum += w * y_[i];
  }
  // Centring the design on the query makes the fitted value the intercept.
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 4) {
    out.fallback = true;
    if (w_sum > 0.0) {
      out.raw = wy_sum / w_sum;
    } else {
      double sum = 0.0;
      for (std::size_t i : idx) sum += y_[i];
      out.raw = sum / static_cast<double>(k);
    }
  } else {
    out.raw = qr.solve(rhs)(0);
  }
  out.value = clamp_action(out.raw);
  return out;
}

Policy LoessModel::policy() const {
  return [model = *this](std::size_t, const CFState& s) { return model.predict({s.v_follow, s.dv, s.gap}); };
}

nlohmann::json to_json(const LoessModel& m) {
  nlohmann::json x = nlohmann::json::array();
  for (const auto& p : m.inputs()) x.push_back({p[0], p[1], p[2]});
  return {{"span", m.span()}, {"x", x}, {"y", m.targets()}};
}

LoessModel loess_model_from_json(const nlohmann::json& j) {
  try {
    std::vector<LoessModel::Point> x;
    for (const auto& p : j.at("x")) x.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
    return LoessModel(std::move(x), j.at("y").get<std::vector<double>>(), j.at("span").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("Loess model JSON: ") + e.what());
  }
}

}  // namespace cfrl
