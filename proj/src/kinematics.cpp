#include "cfrl/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cfrl/error.hpp"

namespace cfrl {

double clamp_action(double a_raw) {
  if (!std::isfinite(a_raw)) {
    throw Error(ErrorCode::kInvalidAction, "acceleration is not finite");
  }
  return std::clamp(a_raw, -kMaxAcceleration, kMaxAcceleration);
}

CFState step_state(const CFState& s, double a, double v_lead_next, double dt) {
  CFState next;
  next.v_follow = std::max(0.0, s.v_follow + a * dt);
  next.dv = v_lead_next - next.v_follow;
  next.gap = s.gap + 0.5 * (s.dv + next.dv) * dt;
  return next;
}

SimTrajectory run_episode(const Policy& policy, const CFPeriod& period, double dt) {
  if (period.size() < 2) {
    throw Error(ErrorCode::kEmptyPeriod, "period has fewer than 2 samples");
  }
  if (!(dt > 0.0) || std::abs(dt - period.dt) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument,
                "dt " + std::to_string(dt) + " does not match period step " +
                    std::to_string(period.dt));
  }

  SimTrajectory traj;
  traj.dt = dt;
  traj.states.reserve(period.size());
  traj.actions.reserve(period.size() - 1);
  traj.states.push_back(period.state_at(0));

  for (std::size_t t = 0; t + 1 < period.size(); ++t) {
    const CFState& s = traj.states.back();
    const double a = clamp_action(policy(t, s));
    const CFState next = step_state(s, a, period.samples[t + 1].v_lead, dt);
    traj.actions.push_back(a);
    traj.states.push_back(next);
    if (next.gap <= 0.0) {
      traj.collided = true;
      break;
    }
  }
  return traj;
}

Policy replay_policy(const CFPeriod& period) {
  return [&period](std::size_t step, const CFState&) { return period.samples.at(step).a_follow; };
}

}  // namespace cfrl
