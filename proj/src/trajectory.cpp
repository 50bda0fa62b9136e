#include "cfrl/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cfrl/error.hpp"
#include "cfrl/kinematics.hpp"
#include "cfrl/random.hpp"

namespace cfrl {

// ---------------------------------------------------------------------------
// Extraction

namespace {

bool within_following_bounds(const RawLogRecord& r) {
  return std::isfinite(r.long_dist) && std::isfinite(r.lat_dist) &&
         r.long_dist < kMaxLongitudinalDistance && r.lat_dist < kMaxLateralDistance;
}

std::optional<CFPeriod> resample_run(const std::vector<RawLogRecord>& log, std::size_t begin,
                                     std::size_t end, double dt, const std::string& driver_id) {
  const double t0 = log[begin].t;
  const double t_end = log[end - 1].t;
  if (!(t_end - t0 > kMinPeriodDuration)) return std::nullopt;

  const auto n = static_cast<std::size_t>(std::floor((t_end - t0) / dt + 1e-9)) + 1;
  CFPeriod period;
  period.dt = dt;
  period.driver_id = driver_id;
  period.samples.reserve(n);

  std::size_t j = begin;
  for (std::size_t k = 0; k < n; ++k) {
    const double target = t0 + static_cast<double>(k) * dt;
    while (j + 1 < end && std::abs(log[j + 1].t - target) < std::abs(log[j].t - target)) ++j;
    const auto& r = log[j];
    period.samples.push_back({r.v_follow, r.v_lead, r.long_dist, r.a_follow});
  }
  if (!(period.duration() > kMinPeriodDuration)) return std::nullopt;
  return period;
}

}  // namespace

std::vector<CFPeriod> extract_periods(const std::vector<RawLogRecord>& log, double dt,
                                      const std::string& driver_id) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "dt must be positive");
  for (std::size_t i = 1; i < log.size(); ++i) {
    if (!(log[i].t > log[i - 1].t)) {
      throw Error(ErrorCode::kMalformedLog,
                  "timestamps not strictly increasing at row " + std::to_string(i));
    }
  }

  std::vector<CFPeriod> periods;
  std::size_t i = 0;
  while (i < log.size()) {
    if (!within_following_bounds(log[i])) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < log.size() && log[j].target_id == log[i].target_id && within_following_bounds(log[j])) {
      ++j;
    }
    if (auto p = resample_run(log, i, j, dt, driver_id)) periods.push_back(std::move(*p));
    i = j;
  }
  return periods;
}

std::vector<RawLogRecord> to_raw_log(const CFPeriod& period, std::int64_t target_id, double t0) {
  std::vector<RawLogRecord> log;
  log.reserve(period.size());
  for (std::size_t i = 0; i < period.size(); ++i) {
    const auto& s = period.samples[i];
    log.push_back({t0 + static_cast<double>(i) * period.dt, target_id, s.v_follow, s.v_lead, s.gap, 0.0,
                   s.a_follow});
  }
  return log;
}

// ---------------------------------------------------------------------------
// Styles and priors

const char* to_string(DrivingStyle style) {
  switch (style) {
    case DrivingStyle::kAggressive: return "aggressive";
    case DrivingStyle::kConservative: return "conservative";
    case DrivingStyle::kUnknown: return "unknown";
  }
  return "unknown";
}

DrivingStyle driving_style_from_string(const std::string& name) {
  if (name == "aggressive") return DrivingStyle::kAggressive;
  if (name == "conservative") return DrivingStyle::kConservative;
  if (name == "unknown") return DrivingStyle::kUnknown;
  throw Error(ErrorCode::kInvalidArgument, "unknown driving style '" + name + "'");
}

const StylePrior& StylePriors::get(DrivingStyle style) const {
  switch (style) {
    case DrivingStyle::kAggressive: return aggressive;
    case DrivingStyle::kConservative: return conservative;
    case DrivingStyle::kUnknown: break;
  }
  throw Error(ErrorCode::kInvalidArgument, "no generator prior for style 'unknown'");
}

StylePriors default_style_priors() {
  StylePriors p;
  p.version = 1;
  p.aggressive = {.a_max = {1.0, 1.6},
                  .a_conf = {1.5, 2.5},
                  .v_desired = {28.0, 34.0},
                  .beta = {3.5, 4.5},
                  .s_jam = {1.5, 2.5},
                  .t_headway = {1.15, 1.45},
                  .leader_mean_speed = {7.0, 15.0}};
  p.conservative = {.a_max = {0.7, 1.2},
                    .a_conf = {1.0, 2.0},
                    .v_desired = {26.0, 32.0},
                    .beta = {3.5, 4.5},
                    .s_jam = {2.0, 3.5},
                    .t_headway = {1.65, 2.0},
                    .leader_mean_speed = {6.0, 13.0}};
  return p;
}

namespace {

nlohmann::json range_json(const Range& r) { return nlohmann::json::array({r.lo, r.hi}); }

Range range_from_json(const nlohmann::json& j) {
  Range r{j.at(0).get<double>(), j.at(1).get<double>()};
  if (!(r.lo <= r.hi)) throw Error(ErrorCode::kFormat, "prior range has lo > hi");
  return r;
}

nlohmann::json prior_json(const StylePrior& p) {
  return {{"a_max", range_json(p.a_max)},         {"a_conf", range_json(p.a_conf)},
          {"v_desired", range_json(p.v_desired)}, {"beta", range_json(p.beta)},
          {"s_jam", range_json(p.s_jam)},         {"t_headway", range_json(p.t_headway)},
          {"leader_mean_speed", range_json(p.leader_mean_speed)}};
}

StylePrior prior_from_json(const nlohmann::json& j) {
  return {range_from_json(j.at("a_max")),     range_from_json(j.at("a_conf")),
          range_from_json(j.at("v_desired")), range_from_json(j.at("beta")),
          range_from_json(j.at("s_jam")),     range_from_json(j.at("t_headway")),
          range_from_json(j.at("leader_mean_speed"))};
}

double draw(Rng& rng, const Range& r) {
  if (r.hi <= r.lo) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

}  // namespace

nlohmann::json to_json(const StylePriors& priors) {
  return {{"format", "cfrl-style-priors"},
          {"version", priors.version},
          {"aggressive", prior_json(priors.aggressive)},
          {"conservative", prior_json(priors.conservative)}};
}

StylePriors style_priors_from_json(const nlohmann::json& j) {
  try {
    StylePriors p;
    p.version = j.at("version").get<int>();
    p.aggressive = prior_from_json(j.at("aggressive"));
    p.conservative = prior_from_json(j.at("conservative"));
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("style priors: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Synthetic generation

namespace {

constexpr double kLeaderMaxSpeed = 27.0;
constexpr double kLeaderMaxAccel = 2.0;
constexpr double kLeaderMaxDecel = -2.5;
constexpr double kMinGeneratedGap = 0.5;
constexpr int kMaxAttempts = 200;

std::vector<double> leader_profile(const StylePrior& prior, const GeneratorOptions& opt, std::size_t n,
                                   Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double dt = opt.dt;
  const double cruise = draw(rng, prior.leader_mean_speed);
  const double duration = static_cast<double>(n - 1) * dt;

  double stop_begin = std::numeric_limits<double>::infinity();
  double stop_end = stop_begin;
  if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < opt.stop_probability) {
    stop_begin = std::uniform_real_distribution<double>(0.15, 0.55)(rng) * duration;
    stop_end = stop_begin + std::uniform_real_distribution<double>(4.0, 9.0)(rng);
  }

  std::vector<double> v(n);
  v[0] = std::clamp(cruise + 2.0 * normal(rng), 1.0, kLeaderMaxSpeed);
  double disturbance = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    const double t = static_cast<double>(k - 1) * dt;
    const bool stopping = t >= stop_begin && t < stop_end;
    const double target = stopping ? 0.0 : cruise;
    const double gain = stopping ? 0.6 : 0.08;
    // Temporally correlated speed disturbance (AR(1), ~3 s memory).
    disturbance = 0.97 * disturbance + 0.12 * normal(rng);
    const double a = std::clamp(gain * (target - v[k - 1]) + disturbance, kLeaderMaxDecel, kLeaderMaxAccel);
    v[k] = std::clamp(v[k - 1] + a * dt, 0.0, kLeaderMaxSpeed);
  }
  return v;
}

std::optional<CFPeriod> try_generate_period(const IDMParams& params, const StylePrior& prior,
                                            const GeneratorOptions& opt, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double dt = opt.dt;
  const double duration = std::uniform_real_distribution<double>(opt.min_duration, opt.max_duration)(rng);
  const auto n = static_cast<std::size_t>(std::llround(duration / dt)) + 1;
  const std::vector<double> v_lead = leader_profile(prior, opt, n, rng);

  const double v0 = std::clamp(v_lead[0] + std::uniform_real_distribution<double>(-1.0, 1.0)(rng), 0.0,
                               kLeaderMaxSpeed);
  double gap0 = params.s_jam + v0 * params.t_headway + 5.0;
  if (v0 < 0.97 * params.v_desired) gap0 = idm_equilibrium_gap(params, v0);
  gap0 *= std::uniform_real_distribution<double>(0.9, 1.25)(rng);

  CFPeriod period;
  period.dt = dt;
  period.samples.reserve(n);
  CFState s{v0, v_lead[0] - v0, gap0};
  for (std::size_t t = 0; t < n; ++t) {
    if (!(s.gap > kMinGeneratedGap) || !(s.gap < kMaxLongitudinalDistance)) return std::nullopt;
    double a = idm_acceleration(params, s.v_follow, s.dv, s.gap);
    if (t + 1 == n) {
      period.samples.push_back({s.v_follow, v_lead[t], s.gap, a});
      break;
    }
    if (opt.accel_noise_std > 0.0) a = clamp_action(a + opt.accel_noise_std * normal(rng));
    const CFState next = step_state(s, a, v_lead[t + 1], dt);
    // Record the realised acceleration so replaying it reproduces the follower.
    const double a_eff = (next.v_follow - s.v_follow) / dt;
    period.samples.push_back({s.v_follow, v_lead[t], s.gap, a_eff});
    s = next;
  }
  return period;
}

}  // namespace

CFPeriod generate_period(const IDMParams& params, const StylePrior& prior, const GeneratorOptions& options,
                         std::uint64_t seed) {
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    if (auto p = try_generate_period(params, prior, options, derive_seed(seed, attempt))) {
      return std::move(*p);
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "could not generate a period satisfying the spacing bounds");
}

DriverDataset generate_synthetic_driver(DrivingStyle style, std::size_t n_periods, std::uint64_t seed,
                                        const GeneratorOptions& options, const std::string& driver_id) {
  if (n_periods < 1) throw Error(ErrorCode::kInvalidArgument, "n_periods must be >= 1");
  if (!(options.min_duration > kMinPeriodDuration) || options.max_duration < options.min_duration) {
    throw Error(ErrorCode::kInvalidArgument, "generator duration range must exceed 15 s");
  }
  const StylePrior& prior = options.priors.get(style);
  const std::uint64_t base = derive_seed(seed, SeedStream::kGenerator);

  IDMParams truth;
  if (options.ground_truth) {
    truth = *options.ground_truth;
  } else {
    Rng rng(derive_seed(base, 0));
    truth.a_max = draw(rng, prior.a_max);
    truth.a_conf = draw(rng, prior.a_conf);
    truth.v_desired = draw(rng, prior.v_desired);
    truth.beta = draw(rng, prior.beta);
    truth.s_jam = draw(rng, prior.s_jam);
    truth.t_headway = draw(rng, prior.t_headway);
  }

  DriverDataset ds;
  ds.driver_id = driver_id;
  ds.style = style;
  ds.ground_truth = truth;
  ds.periods.reserve(n_periods);
  for (std::size_t p = 0; p < n_periods; ++p) {
    CFPeriod period = generate_period(truth, prior, options, derive_seed(base, p + 1));
    period.driver_id = driver_id;
    ds.periods.push_back(std::move(period));
  }
  return ds;
}

DatasetSplit split_calibration_validation(const DriverDataset& ds, std::uint64_t seed) {
  const std::size_t n = ds.periods.size();
  if (n < 10) {
    throw Error(ErrorCode::kInsufficientData,
                "split needs at least 10 periods, got " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, SeedStream::kSplit));
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_cal = static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n)));
  DatasetSplit split;
  split.calibration_index.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_cal));
  split.validation_index.assign(order.begin() + static_cast<std::ptrdiff_t>(n_cal), order.end());
  for (auto i : split.calibration_index) split.calibration.push_back(ds.periods[i]);
  for (auto i : split.validation_index) split.validation.push_back(ds.periods[i]);
  return split;
}

// ---------------------------------------------------------------------------
// Features and clustering

StyleFeatures style_features(const DriverDataset& ds) {
  std::array<double, 3> sum{}, sum_sq{};
  std::size_t n = 0;
  for (const auto& p : ds.periods) {
    for (const auto& s : p.samples) {
      const std::array<double, 3> x{s.v_follow, s.gap, s.v_lead - s.v_follow};
      for (int k = 0; k < 3; ++k) {
        sum[k] += x[k];
        sum_sq[k] += x[k] * x[k];
      }
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorCode::kInsufficientData, "driver " + ds.driver_id + " has no samples");
  StyleFeatures f{};
  const auto nd = static_cast<double>(n);
  for (int k = 0; k < 3; ++k) {
    const double mean = sum[k] / nd;
    f[2 * k] = mean;
    f[2 * k + 1] = std::sqrt(std::max(0.0, sum_sq[k] / nd - mean * mean));
  }
  return f;
}

double mean_time_gap(const std::vector<CFPeriod>& periods) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : periods) {
    for (const auto& s : p.samples) {
      if (s.v_follow > kTimeGapMinSpeed) {
        sum += s.gap / s.v_follow;
        ++n;
      }
    }
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

double mean_gap(const std::vector<CFPeriod>& periods) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : periods) {
    for (const auto& s : p.samples) {
      sum += s.gap;
      ++n;
    }
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, int restarts, std::uint64_t seed,
                    int max_iterations) {
  const std::size_t n = points.size();
  if (k < 1 || n < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::kInsufficientData, "k-means needs at least k points");
  }
  const std::size_t dim = points.front().size();
  Rng rng(derive_seed(seed, SeedStream::kCluster));

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);

    KMeansResult run;
    for (int c = 0; c < k; ++c) run.centroids.push_back(points[idx[static_cast<std::size_t>(c)]]);
    run.assignment.assign(n, -1);

    for (int iter = 0; iter < max_iterations; ++iter) {
      bool changed = false;
      double objective = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        int arg = 0;
        double dmin = squared_distance(points[i], run.centroids[0]);
        for (int c = 1; c < k; ++c) {
          const double d = squared_distance(points[i], run.centroids[static_cast<std::size_t>(c)]);
          if (d < dmin) {
            dmin = d;
            arg = c;
          }
        }
        changed |= run.assignment[i] != arg;
        run.assignment[i] = arg;
        objective += dmin;
      }
      run.objective_history.push_back(objective);
      if (!changed && iter > 0) break;

      std::vector<std::vector<double>> sums(static_cast<std::size_t>(k), std::vector<double>(dim, 0.0));
      std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
      for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(run.assignment[i]);
        for (std::size_t d = 0; d < dim; ++d) sums[c][d] += points[i][d];
        ++counts[c];
      }
      for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
        if (counts[c] == 0) continue;  // empty cluster keeps its centroid
        for (std::size_t d = 0; d < dim; ++d) run.centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
      }
    }
    run.inertia = run.objective_history.back();
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

ClusteringResult cluster_driving_styles(const std::vector<DriverDataset>& datasets, std::uint64_t seed) {
  if (datasets.size() < 2) throw Error(ErrorCode::kInsufficientData, "clustering needs >= 2 drivers");

  ClusteringResult result;
  for (const auto& ds : datasets) result.features.push_back(style_features(ds));

  const std::size_t n = datasets.size();
  std::vector<std::vector<double>> z(n, std::vector<double>(6, 0.0));
  bool any_spread = false;
  for (std::size_t d = 0; d < 6; ++d) {
    double mean = 0.0;
    for (const auto& f : result.features) mean += f[d];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& f : result.features) var += (f[d] - mean) * (f[d] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) continue;  // constant column stays at 0
    any_spread = true;
    for (std::size_t i = 0; i < n; ++i) z[i][d] = (result.features[i][d] - mean) / sd;
  }
  if (!any_spread) {
    throw Error(ErrorCode::kClusteringDegenerate, "all drivers have identical style features");
  }

  result.kmeans = kmeans(z, 2, 10, seed);

  std::array<double, 2> tg_sum{};
  std::array<int, 2> tg_count{};
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(result.kmeans.assignment[i]);
    tg_sum[c] += mean_time_gap(datasets[i].periods);
    ++tg_count[c];
  }
  if (tg_count[0] == 0 || tg_count[1] == 0) {
    throw Error(ErrorCode::kClusteringDegenerate, "k-means produced an empty cluster");
  }
  const int aggressive = tg_sum[0] / tg_count[0] <= tg_sum[1] / tg_count[1] ? 0 : 1;
  for (int c : result.kmeans.assignment) {
    result.labels.push_back(c == aggressive ? DrivingStyle::kAggressive : DrivingStyle::kConservative);
  }
  return result;
}

}  // namespace cfrl
