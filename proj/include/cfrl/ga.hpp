#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfrl/idm.hpp"

namespace cfrl {

struct GAConfig {
  int population = 300;
  int max_generations = 300;  // counts the initial population as generation 1
  int stall_generations = 100;
  int runs = 12;
  double crossover_rate = 0.8;
  double mutation_rate = 0.1;
  double mutation_scale = 0.05;  // Gaussian sigma as a fraction of each bound range
  double blend_alpha = 0.5;
  int tournament = 3;
  int elitism = 1;
  std::uint64_t seed = 0;
  IDMBounds bounds;

  void validate() const;
};

nlohmann::json to_json(const GAConfig& cfg);
GAConfig ga_config_from_json(const nlohmann::json& j);

/// Collision penalty added to the truncated-trajectory RMSPE.
inline constexpr double kCollisionPenalty = 1.0;

/// Pooled spacing RMSPE of IDM rollouts over `periods`. A colliding rollout
/// contributes only its simulated samples and adds kCollisionPenalty once.
double idm_fitness(const IDMParams& p, const std::vector<CFPeriod>& periods);

struct GARun {
  IDMParams best;
  double fitness = 0.0;
  std::vector<double> history;  // best fitness after each generation
};

struct GAResult {
  IDMParams best;
  double fitness = 0.0;
  int best_run = 0;
  std::vector<GARun> runs;
};

/// Independent GA runs; the lowest-fitness parameters across runs win.
GAResult ga_calibrate_idm(const std::vector<CFPeriod>& calibration, const GAConfig& cfg);

}  // namespace cfrl
