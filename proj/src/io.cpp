#include "cfrl/io.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "cfrl/error.hpp"
#include "cfrl/evaluation.hpp"

namespace fs = std::filesystem;

namespace cfrl {

void write_file_atomic(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  static thread_local std::mt19937_64 salt(std::random_device{}());
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(salt() % 1000000007ULL);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp, ec);
      throw Error(ErrorCode::kIo, "write failed: " + path.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::kIo, "cannot rename into " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

nlohmann::json read_json_file(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kFormat, path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const nlohmann::json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text, const std::string& header) {
  std::istringstream is(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool first = true;
  const auto want = split_fields(header);
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_fields(line);
    if (first) {
      if (f != want) throw Error(ErrorCode::kFormat, "expected CSV header '" + header + "'");
      first = false;
      continue;
    }
    if (f.size() != want.size()) {
      throw Error(ErrorCode::kFormat, "CSV row has " + std::to_string(f.size()) + " fields, expected " +
                                          std::to_string(want.size()));
    }
    rows.push_back(std::move(f));
  }
  if (first) throw Error(ErrorCode::kFormat, "empty CSV; expected header '" + header + "'");
  return rows;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kFormat, "not a number: '" + s + "'");
  }
  if (used != s.size()) throw Error(ErrorCode::kFormat, "not a number: '" + s + "'");
  return v;
}

constexpr const char* kPeriodHeader = "t,v_follow,v_lead,gap,a_follow";
constexpr const char* kRawHeader = "t,target_id,v_follow,v_lead,long_dist,lat_dist,a_follow";

}  // namespace

std::string period_csv(const CFPeriod& p) {
  std::ostringstream os;
  os << kPeriodHeader << '\n';
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& s = p.samples[i];
    os << format_double(static_cast<double>(i) * p.dt) << ',' << format_double(s.v_follow) << ','
       << format_double(s.v_lead) << ',' << format_double(s.gap) << ',' << format_double(s.a_follow) << '\n';
  }
  return os.str();
}

CFPeriod parse_period_csv(const std::string& text, const std::string& driver_id) {
  const auto rows = parse_csv(text, kPeriodHeader);
  if (rows.empty()) throw Error(ErrorCode::kEmptyPeriod, "period file has no samples");
  CFPeriod p;
  p.driver_id = driver_id;
  for (const auto& r : rows) p.samples.push_back({to_double(r[1]), to_double(r[2]), to_double(r[3]), to_double(r[4])});
  if (rows.size() >= 2) {
    p.dt = to_double(rows[1][0]) - to_double(rows[0][0]);
    if (!(p.dt > 0.0)) throw Error(ErrorCode::kFormat, "period timestamps must increase");
  }
  return p;
}

CFPeriod read_period_csv(const fs::path& path, const std::string& driver_id) {
  try {
    return parse_period_csv(read_file(path), driver_id);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string trajectory_csv(const SimTrajectory& traj, const CFPeriod& period, double final_action) {
  std::ostringstream os;
  os << kPeriodHeader << '\n';
  for (std::size_t i = 0; i < period.size(); ++i) {
    const std::size_t k = std::min(i, traj.states.size() - 1);
    const CFState& s = traj.states[k];
    double a = 0.0;
    if (i == k) a = k < traj.actions.size() ? traj.actions[k] : (traj.collided ? 0.0 : final_action);
    os << format_double(static_cast<double>(i) * period.dt) << ',' << format_double(s.v_follow) << ','
       << format_double(period.samples[i].v_lead) << ',' << format_double(s.gap) << ',' << format_double(a) << '\n';
  }
  return os.str();
}

std::string raw_log_csv(const std::vector<RawLogRecord>& log) {
  std::ostringstream os;
  os << kRawHeader << '\n';
  for (const auto& r : log) {
    os << format_double(r.t) << ',' << r.target_id << ',' << format_double(r.v_follow) << ','
       << format_double(r.v_lead) << ',' << format_double(r.long_dist) << ',' << format_double(r.lat_dist) << ','
       << format_double(r.a_follow) << '\n';
  }
  return os.str();
}

std::vector<RawLogRecord> parse_raw_log_csv(const std::string& text) {
  std::vector<RawLogRecord> out;
  for (const auto& r : parse_csv(text, kRawHeader)) {
    RawLogRecord rec;
    rec.t = to_double(r[0]);
    try {
      std::size_t used = 0;
      rec.target_id = std::stoll(r[1], &used);
      if (used != r[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(ErrorCode::kFormat, "target_id is not an integer: '" + r[1] + "'");
    }
    rec.v_follow = to_double(r[2]);
    rec.v_lead = to_double(r[3]);
    rec.long_dist = to_double(r[4]);
    rec.lat_dist = to_double(r[5]);
    rec.a_follow = to_double(r[6]);
    out.push_back(rec);
  }
  return out;
}

void save_dataset(const fs::path& dir, const std::vector<DriverDataset>& drivers) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& d : drivers) {
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t i = 0; i < d.periods.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "p%03zu.csv", i);
      const fs::path rel = fs::path(d.driver_id) / name;
      write_file_atomic(dir / rel, period_csv(d.periods[i]));
      files.push_back(rel.generic_string());
    }
    nlohmann::json entry = {{"driver_id", d.driver_id}, {"style", to_string(d.style)}, {"dt", d.dt()}, {"periods", files}};
    if (d.ground_truth) entry["ground_truth"] = to_json(*d.ground_truth);
    list.push_back(entry);
  }
  write_json_file(dir / kManifestName, {{"format", "cfrl-dataset"}, {"version", 1}, {"drivers", list}});
}

std::vector<DriverDataset> load_dataset(const fs::path& dir) {
  const fs::path manifest = dir / kManifestName;
  if (!fs::exists(manifest)) throw Error(ErrorCode::kIo, "no dataset manifest at " + manifest.string());
  const auto j = read_json_file(manifest);
  std::vector<DriverDataset> out;
  try {
    if (j.at("format") != "cfrl-dataset") throw Error(ErrorCode::kFormat, manifest.string() + ": not a dataset manifest");
    for (const auto& e : j.at("drivers")) {
      DriverDataset d;
      d.driver_id = e.at("driver_id").get<std::string>();
      d.style = driving_style_from_string(e.at("style").get<std::string>());
      const double dt = e.at("dt").get<double>();
      if (e.contains("ground_truth")) d.ground_truth = idm_params_from_json(e.at("ground_truth"));
      for (const auto& f : e.at("periods")) {
        CFPeriod p = read_period_csv(dir / f.get<std::string>(), d.driver_id);
        p.dt = dt;
        d.periods.push_back(std::move(p));
      }
      if (d.periods.empty()) throw Error(ErrorCode::kFormat, "driver " + d.driver_id + " has no periods");
      out.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, manifest.string() + ": " + e.what());
  }
  return out;
}

const DriverDataset& find_driver(const std::vector<DriverDataset>& drivers, const std::string& id) {
  for (const auto& d : drivers) {
    if (d.driver_id == id) return d;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown driver '" + id + "'");
}

}  // namespace cfrl
