#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfrl/metrics.hpp"
#include "cfrl/trajectory.hpp"

namespace cfrl {

/// Rolls `policy` over the validation split of `driver`.
RolloutErrors intra_driver_validate(const Policy& policy, const DriverDataset& driver, std::uint64_t split_seed);

/// n x n spacing and speed RMSPE. Row i is the model calibrated on driver i;
/// column j is the driver it is evaluated on. The diagonal uses the
/// validation split only, off-diagonal cells every period of driver j.
struct ErrorMatrix {
  std::vector<std::string> drivers;
  std::vector<std::vector<double>> spacing;
  std::vector<std::vector<double>> speed;
  std::vector<std::vector<std::size_t>> samples;

  std::size_t size() const { return drivers.size(); }
  double mean_diagonal(Quantity q) const;
  double mean_off_diagonal(Quantity q) const;
};

ErrorMatrix inter_driver_validate(const std::vector<Policy>& policies, const std::vector<DriverDataset>& drivers,
                                  std::uint64_t split_seed);

/// Mean off-diagonal error between drivers of the same style and between
/// drivers of different styles.
struct StyleGroupErrors {
  double same_style = 0.0;
  double cross_style = 0.0;
  std::size_t same_cells = 0;
  std::size_t cross_cells = 0;
};

StyleGroupErrors style_group_errors(const ErrorMatrix& m, const std::vector<DrivingStyle>& styles,
                                    Quantity q = Quantity::kSpacing);

struct EvalRow {
  std::string model;
  std::string calib_driver;
  std::string valid_driver;
  double rmspe_spacing = 0.0;
  double rmspe_speed = 0.0;
};

struct ModelSummary {
  std::string model;
  double intra_spacing_mean = 0.0;
  double intra_spacing_std = 0.0;
  double intra_speed_mean = 0.0;
  double intra_speed_std = 0.0;
  // Off-diagonal cells only; zero with zero cells when there is a single driver.
  double inter_spacing_mean = 0.0;
  double inter_spacing_std = 0.0;
  double inter_speed_mean = 0.0;
  double inter_speed_std = 0.0;
  std::size_t inter_cells = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<ModelSummary> summary;  // ascending intra-driver spacing error
};

struct ModelSet {
  std::string name;
  std::vector<Policy> per_driver;  // index-aligned with the driver list
};

EvalReport compare_models(const std::vector<ModelSet>& models, const std::vector<DriverDataset>& drivers,
                          std::uint64_t split_seed);

/// Mean and population standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& xs);

std::string eval_rows_csv(const std::vector<EvalRow>& rows);
std::string error_matrix_csv(const ErrorMatrix& m, Quantity q);
nlohmann::json to_json(const EvalReport& r);
nlohmann::json to_json(const ErrorMatrix& m);

/// Shortest round-trip decimal for doubles (17 significant digits).
std::string format_double(double x);

}  // namespace cfrl
