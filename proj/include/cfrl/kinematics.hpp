#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "cfrl/period.hpp"

namespace cfrl {

inline constexpr double kMaxAcceleration = 3.0;

/// Control law evaluated once per simulation step. `step` is the index of the
/// current state within the episode (0 for the initial state).
using Policy = std::function<double(std::size_t step, const CFState& state)>;

struct SimTrajectory {
  double dt = kDefaultDt;
  std::vector<CFState> states;
  std::vector<double> actions;
  bool collided = false;
};

/// Clamps an acceleration to [-3, 3] m/s^2. Throws kInvalidAction on NaN/inf.
double clamp_action(double a_raw);

/// Point-mass update with trapezoidal spacing integration. The follower speed
/// is floored at zero; when the floor binds, the realised acceleration is what
/// enters the spacing update.
CFState step_state(const CFState& s, double a, double v_lead_next, double dt);

/// Rolls `policy` out over `period` with the leader speed replayed from the
/// recorded samples. Stops early (collided = true) once the gap reaches zero.
SimTrajectory run_episode(const Policy& policy, const CFPeriod& period, double dt = kDefaultDt);

/// Policy that replays the period's recorded follower accelerations.
Policy replay_policy(const CFPeriod& period);

}  // namespace cfrl
