#include "cfrl/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cfrl/error.hpp"

namespace cfrl {

const char* to_string(Quantity q) { return q == Quantity::kSpacing ? "spacing" : "speed"; }

double rmspe(std::span<const double> sim, std::span<const double> obs) {
  if (sim.size() != obs.size() || sim.empty()) {
    throw Error(ErrorCode::kLengthMismatch, "rmspe needs equal, non-empty series");
  }
  RmspeAccumulator acc;
  for (std::size_t i = 0; i < sim.size(); ++i) acc.add(sim[i], obs[i]);
  return acc.value();
}

double RmspeAccumulator::value() const {
  if (count_ == 0) throw Error(ErrorCode::kLengthMismatch, "rmspe over zero samples");
  if (!(den_ > 0.0)) throw Error(ErrorCode::kZeroDenominator, "all observations are zero");
  return std::sqrt(num_ / den_);
}

void accumulate_rollout(const SimTrajectory& traj, const CFPeriod& period, RmspeAccumulator& spacing,
                        RmspeAccumulator& speed) {
  for (std::size_t i = 0; i < period.size(); ++i) {
    const CFState& s = traj.states[std::min(i, traj.states.size() - 1)];
    spacing.add(s.gap, period.samples[i].gap);
    speed.add(s.v_follow, period.samples[i].v_follow);
  }
}

RolloutErrors evaluate_policy(const Policy& policy, const std::vector<CFPeriod>& periods) {
  RmspeAccumulator spacing, speed;
  RolloutErrors out;
  for (const auto& p : periods) {
    const SimTrajectory traj = run_episode(policy, p, p.dt);
    accumulate_rollout(traj, p, spacing, speed);
    if (traj.collided) ++out.collisions;
  }
  out.spacing = spacing.value();
  out.speed = speed.value();
  out.samples = spacing.count();
  return out;
}

}  // namespace cfrl
