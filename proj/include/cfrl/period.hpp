#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cfrl {

inline constexpr double kDefaultDt = 0.1;
inline constexpr double kMaxLongitudinalDistance = 120.0;
inline constexpr double kMaxLateralDistance = 2.5;
inline constexpr double kMinPeriodDuration = 15.0;

/// Instantaneous car-following state.
struct CFState {
  double v_follow = 0.0;  // m/s
  double dv = 0.0;        // leader minus follower, m/s
  double gap = 0.0;       // net spacing, m

  friend bool operator==(const CFState&, const CFState&) = default;
};

struct CFSample {
  double v_follow = 0.0;
  double v_lead = 0.0;
  double gap = 0.0;
  double a_follow = 0.0;

  friend bool operator==(const CFSample&, const CFSample&) = default;
};

/// One extracted car-following event sampled at a fixed step.
struct CFPeriod {
  double dt = kDefaultDt;
  std::vector<CFSample> samples;
  std::string driver_id;

  std::size_t size() const { return samples.size(); }
  double duration() const {
    return samples.empty() ? 0.0 : static_cast<double>(samples.size() - 1) * dt;
  }
  CFState state_at(std::size_t i) const {
    const auto& s = samples.at(i);
    return {s.v_follow, s.v_lead - s.v_follow, s.gap};
  }

  friend bool operator==(const CFPeriod&, const CFPeriod&) = default;
};

// Throws Error(kInvalidArgument) when the period breaks a CFPeriod invariant
// (duration, spacing bound, non-negative speeds, finiteness).
void validate_period(const CFPeriod& period);

}  // namespace cfrl
