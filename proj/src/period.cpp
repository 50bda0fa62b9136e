#include "cfrl/period.hpp"

#include <cmath>
#include <string>

#include "cfrl/error.hpp"

namespace cfrl {

void validate_period(const CFPeriod& period) {
  if (!(period.dt > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "period dt must be positive");
  }
  if (!(period.duration() > kMinPeriodDuration)) {
    throw Error(ErrorCode::kInvalidArgument,
                "period duration " + std::to_string(period.duration()) + " s is not > 15 s");
  }
  for (std::size_t i = 0; i < period.size(); ++i) {
    const auto& s = period.samples[i];
    const bool finite = std::isfinite(s.v_follow) && std::isfinite(s.v_lead) &&
                        std::isfinite(s.gap) && std::isfinite(s.a_follow);
    if (!finite || s.v_follow < 0.0 || s.v_lead < 0.0 || !(s.gap < kMaxLongitudinalDistance)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "period sample " + std::to_string(i) + " violates the car-following bounds");
    }
  }
}

}  // namespace cfrl
