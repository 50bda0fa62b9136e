#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfrl/trajectory.hpp"

namespace cfrl {

/// Writes via a sibling temporary file and rename, so readers never see a
/// partial file. Parent directories are created.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

/// Header `t,v_follow,v_lead,gap,a_follow`; t = i * dt.
std::string period_csv(const CFPeriod& p);
/// dt is taken from the first two timestamps (kDefaultDt for a single row).
CFPeriod parse_period_csv(const std::string& text, const std::string& driver_id = "");
CFPeriod read_period_csv(const std::filesystem::path& path, const std::string& driver_id = "");

/// Simulated follower columns over the period's timeline. a_follow is the
/// applied action, `final_action` for the last sample. Samples after a
/// collision repeat the terminal state with zero acceleration.
std::string trajectory_csv(const SimTrajectory& traj, const CFPeriod& period, double final_action = 0.0);

/// Header `t,target_id,v_follow,v_lead,long_dist,lat_dist,a_follow`.
std::string raw_log_csv(const std::vector<RawLogRecord>& log);
std::vector<RawLogRecord> parse_raw_log_csv(const std::string& text);

inline constexpr const char* kManifestName = "manifest.json";

/// Dataset directory: manifest.json plus one folder per driver holding
/// p000.csv, p001.csv, ...
void save_dataset(const std::filesystem::path& dir, const std::vector<DriverDataset>& drivers);
std::vector<DriverDataset> load_dataset(const std::filesystem::path& dir);
const DriverDataset& find_driver(const std::vector<DriverDataset>& drivers, const std::string& id);

}  // namespace cfrl
