#pragma once

#include <span>
#include <vector>

#include "cfrl/kinematics.hpp"

namespace cfrl {

enum class Quantity { kSpacing, kSpeed };

const char* to_string(Quantity q);

/// sqrt(sum (sim - obs)^2 / sum obs^2). Throws kLengthMismatch for unequal or
/// empty inputs and kZeroDenominator when every observation is zero.
double rmspe(std::span<const double> sim, std::span<const double> obs);

/// Running sums for an RMSPE pooled over many periods.
class RmspeAccumulator {
 public:
  void add(double sim, double obs) {
    num_ += (sim - obs) * (sim - obs);
    den_ += obs * obs;
    ++count_;
  }
  void merge(const RmspeAccumulator& other) {
    num_ += other.num_;
    den_ += other.den_;
    count_ += other.count_;
  }
  std::size_t count() const { return count_; }
  double value() const;

 private:
  double num_ = 0.0;
  double den_ = 0.0;
  std::size_t count_ = 0;
};

struct RolloutErrors {
  double spacing = 0.0;
  double speed = 0.0;
  std::size_t samples = 0;
  std::size_t collisions = 0;
};

/// Accumulates one simulated trajectory against its period. Samples after an
/// early collision are scored against the terminal simulated state.
void accumulate_rollout(const SimTrajectory& traj, const CFPeriod& period, RmspeAccumulator& spacing,
                        RmspeAccumulator& speed);

/// Rolls `policy` out over every period and pools spacing and speed RMSPE.
/// The policy must reset its internal state when called with step 0.
RolloutErrors evaluate_policy(const Policy& policy, const std::vector<CFPeriod>& periods);

}  // namespace cfrl
