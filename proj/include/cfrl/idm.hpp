#pragma once

#include <array>
#include <string>

#include <nlohmann/json.hpp>

#include "cfrl/kinematics.hpp"

namespace cfrl {

/// Intelligent driver model parameters.
struct IDMParams {
  double a_max = 1.0;        // maximum acceleration, m/s^2
  double a_conf = 1.5;       // comfortable deceleration, m/s^2
  double v_desired = 15.0;   // m/s
  double beta = 4.0;         // free-road exponent
  double s_jam = 2.0;        // standstill spacing, m
  double t_headway = 1.2;    // desired time headway, s

  static constexpr std::size_t kDims = 6;

  std::array<double, kDims> to_array() const {
    return {a_max, a_conf, v_desired, beta, s_jam, t_headway};
  }
  static IDMParams from_array(const std::array<double, kDims>& x) {
    return {x[0], x[1], x[2], x[3], x[4], x[5]};
  }
  bool valid() const;

  friend bool operator==(const IDMParams&, const IDMParams&) = default;
};

/// Box bounds used by the GA calibration.
struct IDMBounds {
  std::array<double, IDMParams::kDims> lower{0.1, 0.1, 1.0, 1.0, 0.1, 0.1};
  std::array<double, IDMParams::kDims> upper{5.0, 5.0, 40.0, 10.0, 10.0, 5.0};

  bool contains(const IDMParams& p) const;
};

/// Desired spacing s* = s_jam + max(0, v*T - v*dv / (2 sqrt(a_max a_conf))),
/// with dv = leader minus follower speed.
double idm_desired_gap(const IDMParams& p, double v, double dv);

/// IDM acceleration clamped to the action bounds. Throws kCollisionState for gap <= 0.
double idm_acceleration(const IDMParams& p, double v, double dv, double gap);

/// Gap at which a = 0 for speed v and dv = 0 (requires v < v_desired).
double idm_equilibrium_gap(const IDMParams& p, double v);

Policy idm_policy(const IDMParams& p);

nlohmann::json to_json(const IDMParams& p);
IDMParams idm_params_from_json(const nlohmann::json& j);

}  // namespace cfrl
