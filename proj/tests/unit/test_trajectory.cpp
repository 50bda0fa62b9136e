#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "cfrl/error.hpp"
#include "cfrl/random.hpp"
#include "cfrl/trajectory.hpp"

using namespace cfrl;

namespace {

// 10 Hz log of a steady follow, duration in seconds.
std::vector<RawLogRecord> steady_log(double duration, double lat = 0.5, double dist = 25.0) {
  std::vector<RawLogRecord> log;
  const int n = static_cast<int>(std::lround(duration / 0.1)) + 1;
  for (int i = 0; i < n; ++i) log.push_back({0.1 * i, 7, 12.0, 12.5, dist, lat, 0.0});
  return log;
}

}  // namespace

TEST(Extract, SingleValidRun) {
  const auto periods = extract_periods(steady_log(20.0));
  ASSERT_EQ(periods.size(), 1u);
  EXPECT_NEAR(periods[0].duration(), 20.0, 1e-9);
  EXPECT_EQ(periods[0].samples[0].gap, 25.0);
}

TEST(Extract, LateralViolationGivesNothing) {
  EXPECT_TRUE(extract_periods(steady_log(30.0, 3.0)).empty());
}

TEST(Extract, LongitudinalViolationGivesNothing) {
  EXPECT_TRUE(extract_periods(steady_log(30.0, 0.5, 120.0)).empty());
}

TEST(Extract, TargetChangeSplitsRuns) {
  // 40 s with a new target at t = 14 s: the 14 s fragment is dropped, the 26 s one kept.
  auto log = steady_log(40.0);
  for (auto& r : log) {
    if (r.t >= 14.0 - 1e-9) r.target_id = 8;
  }
  const auto periods = extract_periods(log);
  ASSERT_EQ(periods.size(), 1u);
  EXPECT_NEAR(periods[0].duration(), 26.0, 1e-9);

  // Both fragments of a 28 s log split at 14 s are too short.
  auto short_log = steady_log(28.0);
  for (auto& r : short_log) {
    if (r.t >= 14.0 - 1e-9) r.target_id = 8;
  }
  EXPECT_TRUE(extract_periods(short_log).empty());
}

TEST(Extract, ExactlyFifteenSecondsIsTooShort) {
  EXPECT_TRUE(extract_periods(steady_log(15.0)).empty());
  EXPECT_EQ(extract_periods(steady_log(15.1)).size(), 1u);
}

TEST(Extract, ViolationInMiddleSplits) {
  auto log = steady_log(50.0);
  for (auto& r : log) {
    if (r.t > 20.0 && r.t < 22.0) r.lat_dist = 2.6;
  }
  const auto periods = extract_periods(log);
  ASSERT_EQ(periods.size(), 2u);
  for (const auto& p : periods) {
    EXPECT_GT(p.duration(), 15.0);
    for (const auto& s : p.samples) EXPECT_LT(s.gap, 120.0);
  }
}

TEST(Extract, ResamplesHigherRateLogs) {
  std::vector<RawLogRecord> log;
  for (int i = 0; i <= 20 * 50; ++i) log.push_back({0.02 * i, 1, 10.0 + 0.001 * i, 11.0, 30.0, 0.0, 0.1});
  const auto periods = extract_periods(log, 0.1);
  ASSERT_EQ(periods.size(), 1u);
  EXPECT_EQ(periods[0].size(), 201u);
  EXPECT_NEAR(periods[0].samples[10].v_follow, 10.0 + 0.001 * 50, 1e-12);
}

TEST(Extract, MalformedTimestamps) {
  auto log = steady_log(20.0);
  std::swap(log[5], log[6]);
  try {
    extract_periods(log);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedLog);
  }
  log = steady_log(20.0);
  log[7].t = log[6].t;
  EXPECT_THROW(extract_periods(log), Error);
}

TEST(Extract, Idempotent) {
  const auto ds = generate_synthetic_driver(DrivingStyle::kConservative, 5, 3);
  for (const auto& p : ds.periods) {
    const auto again = extract_periods(to_raw_log(p, 4, 100.0), p.dt, p.driver_id);
    ASSERT_EQ(again.size(), 1u);
    EXPECT_EQ(again[0], p);
  }
}

TEST(Generator, TableOneTargets) {
  const auto agg = generate_synthetic_driver(DrivingStyle::kAggressive, 100, 1);
  EXPECT_NEAR(mean_gap(agg.periods), 15.90, 0.25 * 15.90);
  EXPECT_NEAR(mean_time_gap(agg.periods), 1.73, 0.25 * 1.73);
  const auto con = generate_synthetic_driver(DrivingStyle::kConservative, 100, 1);
  EXPECT_NEAR(mean_gap(con.periods), 20.10, 0.25 * 20.10);
}

TEST(Generator, Deterministic) {
  const auto a = generate_synthetic_driver(DrivingStyle::kAggressive, 8, 42);
  const auto b = generate_synthetic_driver(DrivingStyle::kAggressive, 8, 42);
  EXPECT_EQ(a.periods, b.periods);
  EXPECT_EQ(a.ground_truth, b.ground_truth);
  const auto c = generate_synthetic_driver(DrivingStyle::kAggressive, 8, 43);
  EXPECT_NE(a.periods, c.periods);
}

TEST(Generator, PeriodsSatisfyInvariants) {
  for (auto style : {DrivingStyle::kAggressive, DrivingStyle::kConservative}) {
    const auto ds = generate_synthetic_driver(style, 40, 9);
    ASSERT_TRUE(ds.ground_truth.has_value());
    EXPECT_TRUE(ds.ground_truth->valid());
    for (const auto& p : ds.periods) {
      EXPECT_NO_THROW(validate_period(p));
      EXPECT_GT(p.duration(), 15.0);
      for (const auto& s : p.samples) {
        EXPECT_GE(s.v_follow, 0.0);
        EXPECT_GE(s.v_lead, 0.0);
        EXPECT_LE(s.v_lead, 27.0);
        EXPECT_GT(s.gap, 0.0);
        EXPECT_LT(s.gap, 120.0);
      }
    }
  }
}

TEST(Generator, ReproducibleFromIngredients) {
  GeneratorOptions o;
  const auto ds = generate_synthetic_driver(DrivingStyle::kAggressive, 4, 5, o);
  const std::uint64_t base = derive_seed(5, SeedStream::kGenerator);
  for (std::size_t i = 0; i < ds.periods.size(); ++i) {
    CFPeriod p = generate_period(*ds.ground_truth, o.priors.aggressive, o, derive_seed(base, i + 1));
    p.driver_id = ds.driver_id;
    EXPECT_EQ(p, ds.periods[i]);
  }
}

TEST(Generator, GroundTruthOverride) {
  GeneratorOptions o;
  o.ground_truth = IDMParams{1.2, 1.8, 25.0, 4.0, 2.0, 1.3};
  const auto ds = generate_synthetic_driver(DrivingStyle::kConservative, 2, 5, o);
  EXPECT_EQ(*ds.ground_truth, *o.ground_truth);
  EXPECT_THROW(generate_synthetic_driver(DrivingStyle::kAggressive, 0, 5), Error);
}

TEST(Generator, ShippedPriorsMatchDefaults) {
  std::ifstream in(std::string(CFRL_SOURCE_DIR) + "/config/style_priors.json");
  ASSERT_TRUE(in.good());
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(to_json(style_priors_from_json(j)), to_json(default_style_priors()));
}

TEST(Split, Sizes) {
  const auto ds100 = generate_synthetic_driver(DrivingStyle::kAggressive, 100, 2);
  const auto s = split_calibration_validation(ds100, 7);
  EXPECT_EQ(s.calibration.size(), 70u);
  EXPECT_EQ(s.validation.size(), 30u);
  std::set<std::size_t> all(s.calibration_index.begin(), s.calibration_index.end());
  all.insert(s.validation_index.begin(), s.validation_index.end());
  EXPECT_EQ(all.size(), 100u);
  for (std::size_t i = 0; i < 70; ++i) EXPECT_EQ(s.calibration[i], ds100.periods[s.calibration_index[i]]);

  const auto ds10 = generate_synthetic_driver(DrivingStyle::kAggressive, 10, 2);
  const auto s10 = split_calibration_validation(ds10, 7);
  EXPECT_EQ(s10.calibration.size(), 7u);
  EXPECT_EQ(s10.validation.size(), 3u);
}

TEST(Split, DeterministicAndSeedDependent) {
  const auto ds = generate_synthetic_driver(DrivingStyle::kAggressive, 20, 2);
  EXPECT_EQ(split_calibration_validation(ds, 3).calibration_index,
            split_calibration_validation(ds, 3).calibration_index);
  EXPECT_NE(split_calibration_validation(ds, 3).calibration_index,
            split_calibration_validation(ds, 4).calibration_index);
}

TEST(Split, TooFewPeriods) {
  const auto ds = generate_synthetic_driver(DrivingStyle::kAggressive, 9, 2);
  try {
    split_calibration_validation(ds, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
}

TEST(KMeans, ObjectiveNeverIncreases) {
  Rng rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 60; ++i) pts.push_back({n(rng) + (i % 3) * 2.0, n(rng), n(rng)});
    const auto r = kmeans(pts, 2 + trial % 3, 5, static_cast<std::uint64_t>(trial));
    ASSERT_FALSE(r.objective_history.empty());
    for (std::size_t i = 1; i < r.objective_history.size(); ++i) {
      EXPECT_LE(r.objective_history[i], r.objective_history[i - 1] + 1e-12);
    }
    EXPECT_NEAR(r.inertia, r.objective_history.back(), 1e-9);
  }
}

TEST(Clustering, RecoversGeneratorStyles) {
  std::vector<DriverDataset> drivers;
  for (int i = 0; i < 20; ++i) {
    const auto style = i % 2 == 0 ? DrivingStyle::kAggressive : DrivingStyle::kConservative;
    drivers.push_back(generate_synthetic_driver(style, 15, derive_seed(77, static_cast<std::uint64_t>(i)), {},
                                                "d" + std::to_string(i)));
  }
  const auto r = cluster_driving_styles(drivers, 1);
  int agree = 0;
  for (std::size_t i = 0; i < drivers.size(); ++i) agree += r.labels[i] == drivers[i].style;
  EXPECT_GE(agree, 18);
}

TEST(Clustering, DegenerateInput) {
  const auto d = generate_synthetic_driver(DrivingStyle::kAggressive, 3, 1);
  try {
    cluster_driving_styles({d, d, d}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kClusteringDegenerate);
  }
  EXPECT_THROW(cluster_driving_styles({d}, 1), Error);
}

TEST(Style, NamesRoundTrip) {
  for (auto s : {DrivingStyle::kAggressive, DrivingStyle::kConservative, DrivingStyle::kUnknown}) {
    EXPECT_EQ(driving_style_from_string(to_string(s)), s);
  }
  EXPECT_THROW(driving_style_from_string("calm"), Error);
}
