#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfrl/idm.hpp"
#include "cfrl/period.hpp"

namespace cfrl {

// ---------------------------------------------------------------------------
// Raw radar logs and car-following period extraction

struct RawLogRecord {
  double t = 0.0;
  std::int64_t target_id = 0;
  double v_follow = 0.0;
  double v_lead = 0.0;
  double long_dist = 0.0;
  double lat_dist = 0.0;
  double a_follow = 0.0;
};

/// Returns every maximal run in which the radar target id is constant, the
/// longitudinal distance stays below 120 m, the lateral distance below 2.5 m
/// and the run lasts longer than 15 s. Runs are resampled to `dt` by nearest
/// sample. Throws kMalformedLog if timestamps are not strictly increasing.
std::vector<CFPeriod> extract_periods(const std::vector<RawLogRecord>& log, double dt = kDefaultDt,
                                      const std::string& driver_id = {});

/// Inverse of extraction for a single period: a log with one target id,
/// zero lateral offset and long_dist equal to the gap.
std::vector<RawLogRecord> to_raw_log(const CFPeriod& period, std::int64_t target_id = 1,
                                     double t0 = 0.0);

// ---------------------------------------------------------------------------
// Driver datasets and synthetic generation

enum class DrivingStyle { kAggressive, kConservative, kUnknown };

const char* to_string(DrivingStyle style);
DrivingStyle driving_style_from_string(const std::string& name);

struct DriverDataset {
  std::string driver_id;
  std::vector<CFPeriod> periods;
  DrivingStyle style = DrivingStyle::kUnknown;
  std::optional<IDMParams> ground_truth;  // set for synthetic drivers

  double dt() const { return periods.empty() ? kDefaultDt : periods.front().dt; }
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Per-style distribution of IDM ground truth and leader behaviour.
struct StylePrior {
  Range a_max, a_conf, v_desired, beta, s_jam, t_headway;
  Range leader_mean_speed;  // m/s, target of the leader's mean reversion
};

struct StylePriors {
  int version = 1;
  StylePrior aggressive;
  StylePrior conservative;

  const StylePrior& get(DrivingStyle style) const;
};

/// Compiled-in priors; config/style_priors.json ships the same values.
StylePriors default_style_priors();
StylePriors style_priors_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StylePriors& priors);

struct GeneratorOptions {
  double dt = kDefaultDt;
  double min_duration = 16.0;  // s
  double max_duration = 35.0;  // s
  double accel_noise_std = 0.05;  // m/s^2; 0 gives a noiseless IDM follower
  double stop_probability = 0.15;  // chance a period contains a leader stop phase
  StylePriors priors = default_style_priors();
  std::optional<IDMParams> ground_truth;  // overrides the prior draw
};

/// Synthetic naturalistic-style driver: a mean-reverting leader speed profile
/// in [0, 27] m/s followed by an IDM driver. Deterministic per seed.
DriverDataset generate_synthetic_driver(DrivingStyle style, std::size_t n_periods, std::uint64_t seed,
                                        const GeneratorOptions& options = {},
                                        const std::string& driver_id = "d01");

/// One period driven by `params` behind a synthetic leader; exposed so tests
/// can reproduce a follower from its ingredients.
CFPeriod generate_period(const IDMParams& params, const StylePrior& prior, const GeneratorOptions& options,
                         std::uint64_t seed);

struct DatasetSplit {
  std::vector<CFPeriod> calibration;
  std::vector<CFPeriod> validation;
  std::vector<std::size_t> calibration_index;
  std::vector<std::size_t> validation_index;
};

/// Seeded 70/30 split: permute, then take the first round(0.7 n) periods.
DatasetSplit split_calibration_validation(const DriverDataset& ds, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Driving-style features and clustering

/// (mean, std) of speed, gap and relative speed, pooled over all samples.
using StyleFeatures = std::array<double, 6>;

StyleFeatures style_features(const DriverDataset& ds);

inline constexpr double kTimeGapMinSpeed = 2.0;  // m/s

/// Mean of gap / speed over samples faster than kTimeGapMinSpeed.
double mean_time_gap(const std::vector<CFPeriod>& periods);
double mean_gap(const std::vector<CFPeriod>& periods);

struct KMeansResult {
  std::vector<int> assignment;
  std::vector<std::vector<double>> centroids;
  double inertia = 0.0;
  std::vector<double> objective_history;  // Lloyd objective of the winning restart
};

/// Lloyd's algorithm with `restarts` random Forgy initialisations; returns the
/// restart with the lowest within-cluster sum of squares.
KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, int restarts,
                    std::uint64_t seed, int max_iterations = 100);

struct ClusteringResult {
  std::vector<DrivingStyle> labels;
  std::vector<StyleFeatures> features;
  KMeansResult kmeans;
};

/// Standardises the style features, splits the drivers into two clusters and
/// labels the one with the shorter mean time gap aggressive.
ClusteringResult cluster_driving_styles(const std::vector<DriverDataset>& datasets,
                                        std::uint64_t seed = 0);

}  // namespace cfrl
