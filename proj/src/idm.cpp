#include "cfrl/idm.hpp"

#include <cmath>

#include "cfrl/error.hpp"

namespace cfrl {

bool IDMParams::valid() const {
  for (double x : to_array()) {
    if (!std::isfinite(x) || x <= 0.0) return false;
  }
  return true;
}

bool IDMBounds::contains(const IDMParams& p) const {
  const auto x = p.to_array();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < lower[i] || x[i] > upper[i]) return false;
  }
  return true;
}

double idm_desired_gap(const IDMParams& p, double v, double dv) {
  const double dynamic = v * p.t_headway - v * dv / (2.0 * std::sqrt(p.a_max * p.a_conf));
  return p.s_jam + std::max(0.0, dynamic);
}

double idm_acceleration(const IDMParams& p, double v, double dv, double gap) {
  if (!(gap > 0.0)) {
    throw Error(ErrorCode::kCollisionState, "IDM evaluated at non-positive gap");
  }
  const double s_star = idm_desired_gap(p, v, dv);
  const double ratio = s_star / gap;
  const double a = p.a_max * (1.0 - std::pow(v / p.v_desired, p.beta) - ratio * ratio);
  return clamp_action(a);
}

double idm_equilibrium_gap(const IDMParams& p, double v) {
  const double free = 1.0 - std::pow(v / p.v_desired, p.beta);
  if (!(free > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "no equilibrium gap at or above desired speed");
  }
  return (p.s_jam + v * p.t_headway) / std::sqrt(free);
}

Policy idm_policy(const IDMParams& p) {
  return [p](std::size_t, const CFState& s) { return idm_acceleration(p, s.v_follow, s.dv, s.gap); };
}

nlohmann::json to_json(const IDMParams& p) {
  return {{"a_max", p.a_max}, {"a_conf", p.a_conf},   {"v_desired", p.v_desired},
          {"beta", p.beta},   {"s_jam", p.s_jam},     {"t_headway", p.t_headway}};
}

IDMParams idm_params_from_json(const nlohmann::json& j) {
  try {
    IDMParams p{j.at("a_max").get<double>(), j.at("a_conf").get<double>(),
                j.at("v_desired").get<double>(), j.at("beta").get<double>(),
                j.at("s_jam").get<double>(), j.at("t_headway").get<double>()};
    if (!p.valid()) throw Error(ErrorCode::kFormat, "IDM parameters must be positive and finite");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("IDM parameter file: ") + e.what());
  }
}

}  // namespace cfrl
