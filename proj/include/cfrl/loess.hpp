#pragma once

#include <array>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfrl/kinematics.hpp"

namespace cfrl {

/// (1 - u^3)^3 on [0, 1], zero elsewhere.
double tricube_weight(double u);

/// Locally weighted linear regression of follower acceleration on
/// (speed, relative speed, gap). Distances are measured on features
/// standardised with the training mean and standard deviation.
class LoessModel {
 public:
  using Point = std::array<double, 3>;

  struct Prediction {
    double value = 0.0;  // clamped to the action bounds
    double raw = 0.0;    // local fit before clamping
    bool fallback = false;  // singular local design; weighted mean used instead
  };

  LoessModel() = default;
  LoessModel(std::vector<Point> x, std::vector<double> y, double span = 0.4);

  /// Training pairs are every (state, recorded acceleration) sample.
  static LoessModel fit(const std::vector<CFPeriod>& periods, double span = 0.4);

  Prediction predict_detail(const Point& x) const;
  double predict(const Point& x) const { return predict_detail(x).value; }
  Policy policy() const;

  double span() const { return span_; }
  std::size_t size() const { return y_.size(); }
  const std::vector<Point>& inputs() const { return x_; }
  const std::vector<double>& targets() const { return y_; }
  /// Number of neighbours in each local fit: ceil(span * n).
  std::size_t neighbourhood() const;
  Point standardise(const Point& x) const;

 private:
  std::vector<Point> x_;
  std::vector<double> y_;
  std::vector<Point> z_;  // standardised copy of x_
  double span_ = 0.4;
  Point mean_{};
  Point scale_{1.0, 1.0, 1.0};
};

nlohmann::json to_json(const LoessModel& m);
LoessModel loess_model_from_json(const nlohmann::json& j);

}  // namespace cfrl
