#include "cfrl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cfrl/error.hpp"

namespace cfrl {

RolloutErrors intra_driver_validate(const Policy& policy, const DriverDataset& driver, std::uint64_t split_seed) {
  return evaluate_policy(policy, split_calibration_validation(driver, split_seed).validation);
}

namespace {

const std::vector<std::vector<double>>& pick(const ErrorMatrix& m, Quantity q) {
  return q == Quantity::kSpacing ? m.spacing : m.speed;
}

}  // namespace

double ErrorMatrix::mean_diagonal(Quantity q) const {
  if (drivers.empty()) throw Error(ErrorCode::kInsufficientData, "empty error matrix");
  const auto& g = pick(*this, q);
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += g[i][i];
  return s / static_cast<double>(size());
}

double ErrorMatrix::mean_off_diagonal(Quantity q) const {
  if (size() < 2) throw Error(ErrorCode::kInsufficientData, "off-diagonal mean needs two drivers");
  const auto& g = pick(*this, q);
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = 0; j < size(); ++j) {
      if (i != j) s += g[i][j];
    }
  }
  return s / static_cast<double>(size() * (size() - 1));
}

ErrorMatrix inter_driver_validate(const std::vector<Policy>& policies, const std::vector<DriverDataset>& drivers,
                                  std::uint64_t split_seed) {
  if (policies.size() != drivers.size()) {
    throw Error(ErrorCode::kLengthMismatch, "one model per driver is required");
  }
  const std::size_t n = drivers.size();
  ErrorMatrix m;
  m.spacing.assign(n, std::vector<double>(n, 0.0));
  m.speed = m.spacing;
  m.samples.assign(n, std::vector<std::size_t>(n, 0));
  for (const auto& d : drivers) m.drivers.push_back(d.driver_id);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const RolloutErrors e =
          i == j ? intra_driver_validate(policies[i], drivers[j], split_seed) : evaluate_policy(policies[i], drivers[j].periods);
      m.spacing[i][j] = e.spacing;
      m.speed[i][j] = e.speed;
      m.samples[i][j] = e.samples;
    }
  }
  return m;
}

StyleGroupErrors style_group_errors(const ErrorMatrix& m, const std::vector<DrivingStyle>& styles, Quantity q) {
  if (styles.size() != m.size()) throw Error(ErrorCode::kLengthMismatch, "one style per driver is required");
  const auto& g = pick(m, q);
  StyleGroupErrors out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (i == j) continue;
      if (styles[i] == styles[j]) {
        out.same_style += g[i][j];
        ++out.same_cells;
      } else {
        out.cross_style += g[i][j];
        ++out.cross_cells;
      }
    }
  }
  if (out.same_cells > 0) out.same_style /= static_cast<double>(out.same_cells);
  if (out.cross_cells > 0) out.cross_style /= static_cast<double>(out.cross_cells);
  return out;
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

EvalReport compare_models(const std::vector<ModelSet>& models, const std::vector<DriverDataset>& drivers,
                          std::uint64_t split_seed) {
  EvalReport report;
  std::vector<std::vector<EvalRow>> per_model;
  for (const auto& ms : models) {
    const ErrorMatrix m = inter_driver_validate(ms.per_driver, drivers, split_seed);
    ModelSummary s;
    s.model = ms.name;
    std::vector<double> is, iv, xs, xv;
    std::vector<EvalRow> rows;
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = 0; j < m.size(); ++j) {
        rows.push_back({ms.name, m.drivers[i], m.drivers[j], m.spacing[i][j], m.speed[i][j]});
        if (i == j) {
          is.push_back(m.spacing[i][j]);
          iv.push_back(m.speed[i][j]);
        } else {
          xs.push_back(m.spacing[i][j]);
          xv.push_back(m.speed[i][j]);
        }
      }
    }
    std::tie(s.intra_spacing_mean, s.intra_spacing_std) = mean_std(is);
    std::tie(s.intra_speed_mean, s.intra_speed_std) = mean_std(iv);
    std::tie(s.inter_spacing_mean, s.inter_spacing_std) = mean_std(xs);
    std::tie(s.inter_speed_mean, s.inter_speed_std) = mean_std(xv);
    s.inter_cells = xs.size();
    report.summary.push_back(s);
    per_model.push_back(std::move(rows));
  }
  std::vector<std::size_t> order(models.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.summary[a].intra_spacing_mean < report.summary[b].intra_spacing_mean;
  });
  std::vector<ModelSummary> sorted;
  for (std::size_t i : order) {
    sorted.push_back(report.summary[i]);
    for (auto& r : per_model[i]) report.rows.push_back(std::move(r));
  }
  report.summary = std::move(sorted);
  return report;
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string eval_rows_csv(const std::vector<EvalRow>& rows) {
  std::ostringstream os;
  os << "model,calib_driver,valid_driver,rmspe_spacing,rmspe_speed\n";
  for (const auto& r : rows) {
    os << r.model << ',' << r.calib_driver << ',' << r.valid_driver << ',' << format_double(r.rmspe_spacing) << ','
       << format_double(r.rmspe_speed) << '\n';
  }
  return os.str();
}

std::string error_matrix_csv(const ErrorMatrix& m, Quantity q) {
  const auto& g = pick(m, q);
  std::ostringstream os;
  os << "driver";
  for (const auto& d : m.drivers) os << ',' << d;
  os << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    os << m.drivers[i];
    for (std::size_t j = 0; j < m.size(); ++j) os << ',' << format_double(g[i][j]);
    os << '\n';
  }
  return os.str();
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& x : r.rows) {
    rows.push_back({{"model", x.model},
                    {"calib_driver", x.calib_driver},
                    {"valid_driver", x.valid_driver},
                    {"rmspe_spacing", x.rmspe_spacing},
                    {"rmspe_speed", x.rmspe_speed}});
  }
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& s : r.summary) {
    summary.push_back({{"model", s.model},
                       {"intra_spacing_mean", s.intra_spacing_mean},
                       {"intra_spacing_std", s.intra_spacing_std},
                       {"intra_speed_mean", s.intra_speed_mean},
                       {"intra_speed_std", s.intra_speed_std},
                       {"inter_spacing_mean", s.inter_spacing_mean},
                       {"inter_spacing_std", s.inter_spacing_std},
                       {"inter_speed_mean", s.inter_speed_mean},
                       {"inter_speed_std", s.inter_speed_std},
                       {"inter_cells", s.inter_cells}});
  }
  return {{"rows", rows}, {"summary", summary}};
}

nlohmann::json to_json(const ErrorMatrix& m) {
  return {{"drivers", m.drivers}, {"spacing", m.spacing}, {"speed", m.speed}, {"samples", m.samples}};
}

}  // namespace cfrl
