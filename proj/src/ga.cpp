#include "cfrl/ga.hpp"

#include <algorithm>
#include <cmath>

#include "cfrl/error.hpp"
#include "cfrl/metrics.hpp"
#include "cfrl/random.hpp"

namespace cfrl {

void GAConfig::validate() const {
  if (population < 2) throw Error(ErrorCode::kInvalidArgument, "GA population must be at least 2");
  if (runs < 1) throw Error(ErrorCode::kInvalidArgument, "GA needs at least one run");
  if (max_generations < 1) throw Error(ErrorCode::kInvalidArgument, "GA needs at least one generation");
  if (stall_generations < 1) throw Error(ErrorCode::kInvalidArgument, "stall limit must be positive");
  if (tournament < 1) throw Error(ErrorCode::kInvalidArgument, "tournament size must be positive");
  if (elitism < 0 || elitism >= population) throw Error(ErrorCode::kInvalidArgument, "elitism must be below the population");
  if (crossover_rate < 0 || crossover_rate > 1 || mutation_rate < 0 || mutation_rate > 1) {
    throw Error(ErrorCode::kInvalidArgument, "GA rates must lie in [0, 1]");
  }
  for (std::size_t d = 0; d < IDMParams::kDims; ++d) {
    if (!(bounds.lower[d] > 0.0 && bounds.lower[d] < bounds.upper[d])) {
      throw Error(ErrorCode::kInvalidArgument, "GA bounds must be positive and ordered");
    }
  }
}

nlohmann::json to_json(const GAConfig& c) {
  return {{"population", c.population},         {"max_generations", c.max_generations},
          {"stall_generations", c.stall_generations}, {"runs", c.runs},
          {"crossover_rate", c.crossover_rate}, {"mutation_rate", c.mutation_rate},
          {"mutation_scale", c.mutation_scale}, {"blend_alpha", c.blend_alpha},
          {"tournament", c.tournament},         {"elitism", c.elitism},
          {"seed", c.seed},                     {"lower", c.bounds.lower},
          {"upper", c.bounds.upper}};
}

GAConfig ga_config_from_json(const nlohmann::json& j) {
  GAConfig c;
  try {
    c.population = j.value("population", c.population);
    c.max_generations = j.value("max_generations", c.max_generations);
    c.stall_generations = j.value("stall_generations", c.stall_generations);
    c.runs = j.value("runs", c.runs);
    c.crossover_rate = j.value("crossover_rate", c.crossover_rate);
    c.mutation_rate = j.value("mutation_rate", c.mutation_rate);
    c.mutation_scale = j.value("mutation_scale", c.mutation_scale);
    c.blend_alpha = j.value("blend_alpha", c.blend_alpha);
    c.tournament = j.value("tournament", c.tournament);
    c.elitism = j.value("elitism", c.elitism);
    c.seed = j.value("seed", c.seed);
    if (j.contains("lower")) c.bounds.lower = j.at("lower").get<std::array<double, IDMParams::kDims>>();
    if (j.contains("upper")) c.bounds.upper = j.at("upper").get<std::array<double, IDMParams::kDims>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("GA config JSON: ") + e.what());
  }
  c.validate();
  return c;
}

double idm_fitness(const IDMParams& p, const std::vector<CFPeriod>& periods) {
  // Same dynamics as run_episode with idm_policy, without the per-step allocations.
  RmspeAccumulator acc;
  bool collided = false;
  for (const auto& period : periods) {
    CFState s = period.state_at(0);
    acc.add(s.gap, period.samples[0].gap);
    for (std::size_t i = 0; i + 1 < period.size(); ++i) {
      const double a = idm_acceleration(p, s.v_follow, s.dv, s.gap);
      s = step_state(s, a, period.samples[i + 1].v_lead, period.dt);
      acc.add(s.gap, period.samples[i + 1].gap);
      if (s.gap <= 0.0) {
        collided = true;
        break;
      }
    }
  }
  return acc.value() + (collided ? kCollisionPenalty : 0.0);
}

namespace {

using Genome = std::array<double, IDMParams::kDims>;

struct Individual {
  Genome x;
  double fitness;
};

class Run {
 public:
  Run(const std::vector<CFPeriod>& data, const GAConfig& cfg, std::uint64_t seed)
      : data_(data), cfg_(cfg), rng_(seed) {}

  GARun operator()() {
    std::vector<Individual> pop;
    pop.reserve(static_cast<std::size_t>(cfg_.population));
    for (int i = 0; i < cfg_.population; ++i) {
      Genome g;
      for (std::size_t d = 0; d < g.size(); ++d) {
        g[d] = std::uniform_real_distribution<double>(cfg_.bounds.lower[d], cfg_.bounds.upper[d])(rng_);
      }
      pop.push_back({g, evaluate(g)});
    }
    GARun out;
    Individual best = best_of(pop);
    out.history.push_back(best.fitness);
    int stall = 0;
    for (int gen = 2; gen <= cfg_.max_generations && stall < cfg_.stall_generations; ++gen) {
      pop = next_generation(pop);
      const Individual& b = best_of(pop);
      if (b.fitness < best.fitness) {
        best = b;
        stall = 0;
      } else {
        ++stall;
      }
      out.history.push_back(best.fitness);
    }
    out.best = IDMParams::from_array(best.x);
    out.fitness = best.fitness;
    return out;
  }

 private:
  double evaluate(const Genome& g) const { return idm_fitness(IDMParams::from_array(g), data_); }

  static const Individual& best_of(const std::vector<Individual>& pop) {
    return *std::min_element(pop.begin(), pop.end(),
                             [](const Individual& a, const Individual& b) { return a.fitness < b.fitness; });
  }

  const Individual& tournament(const std::vector<Individual>& pop) {
    std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
    const Individual* best = &pop[pick(rng_)];
    for (int i = 1; i < cfg_.tournament; ++i) {
      const Individual* c = &pop[pick(rng_)];
      if (c->fitness < best->fitness) best = c;
    }
    return *best;
  }

  void clip(Genome& g) const {
    for (std::size_t d = 0; d < g.size(); ++d) g[d] = std::clamp(g[d], cfg_.bounds.lower[d], cfg_.bounds.upper[d]);
  }

  void mutate(Genome& g) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> n(0.0, 1.0);
    for (std::size_t d = 0; d < g.size(); ++d) {
      if (u(rng_) < cfg_.mutation_rate) {
        g[d] += cfg_.mutation_scale * (cfg_.bounds.upper[d] - cfg_.bounds.lower[d]) * n(rng_);
      }
    }
  }

  std::vector<Individual> next_generation(std::vector<Individual>& pop) {
    std::vector<Individual> next;
    next.reserve(pop.size());
    std::vector<Individual> sorted = pop;
    std::partial_sort(sorted.begin(), sorted.begin() + cfg_.elitism, sorted.end(),
                      [](const Individual& a, const Individual& b) { return a.fitness < b.fitness; });
    for (int e = 0; e < cfg_.elitism; ++e) next.push_back(sorted[static_cast<std::size_t>(e)]);

    std::uniform_real_distribution<double> u(0.0, 1.0);
    while (next.size() < pop.size()) {
      Genome c1 = tournament(pop).x;
      Genome c2 = tournament(pop).x;
      if (u(rng_) < cfg_.crossover_rate) {
        for (std::size_t d = 0; d < c1.size(); ++d) {
          const double lo = std::min(c1[d], c2[d]), hi = std::max(c1[d], c2[d]);
          const double ext = cfg_.blend_alpha * (hi - lo);
          std::uniform_real_distribution<double> blx(lo - ext, hi + ext);
          c1[d] = hi > lo ? blx(rng_) : lo;
          c2[d] = hi > lo ? blx(rng_) : lo;
        }
      }
      for (Genome* c : {&c1, &c2}) {
        if (next.size() == pop.size()) break;
        mutate(*c);
        clip(*c);
        next.push_back({*c, evaluate(*c)});
      }
    }
    return next;
  }

  const std::vector<CFPeriod>& data_;
  const GAConfig& cfg_;
  Rng rng_;
};

}  // namespace

GAResult ga_calibrate_idm(const std::vector<CFPeriod>& calibration, const GAConfig& cfg) {
  cfg.validate();
  if (calibration.empty()) throw Error(ErrorCode::kInsufficientData, "GA calibration needs at least one period");
  GAResult res;
  const std::uint64_t base = derive_seed(cfg.seed, SeedStream::kGa);
  for (int r = 0; r < cfg.runs; ++r) {
    res.runs.push_back(Run(calibration, cfg, derive_seed(base, static_cast<std::uint64_t>(r)))());
    if (r == 0 || res.runs.back().fitness < res.fitness) {
      res.fitness = res.runs.back().fitness;
      res.best = res.runs.back().best;
      res.best_run = r;
    }
  }
  return res;
}

}  // namespace cfrl
