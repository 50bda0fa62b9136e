// cfrl: data generation, training, calibration, evaluation and simulation.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cfrl/ddpg.hpp"
#include "cfrl/error.hpp"
#include "cfrl/evaluation.hpp"
#include "cfrl/ga.hpp"
#include "cfrl/io.hpp"
#include "cfrl/models.hpp"
#include "cfrl/trajectory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cfrl;

namespace {

constexpr const char* kToolVersion = "0.1.0";
constexpr const char* kDataEnv = "CFRL_DATA_DIR";

enum class Verbosity { kQuiet, kNormal, kVerbose };
Verbosity g_verbosity = Verbosity::kNormal;

// Diagnostics are JSON lines on stderr; data never goes there.
void diag(const char* level, const std::string& msg, const json& extra = json::object()) {
  if (g_verbosity == Verbosity::kQuiet && std::string(level) != "error") return;
  if (g_verbosity != Verbosity::kVerbose && std::string(level) == "debug") return;
  json line = {{"level", level}, {"msg", msg}};
  for (auto it = extra.begin(); it != extra.end(); ++it) line[it.key()] = it.value();
  std::cerr << line.dump() << '\n';
}

// Collects every output of a command and writes them only once the command
// has succeeded. A failure part-way through removes what was written.
class Outputs {
 public:
  void add(const fs::path& path, std::string content) { files_.emplace_back(path, std::move(content)); }
  void add_json(const fs::path& path, const json& j) { add(path, j.dump(2) + "\n"); }

  std::vector<std::string> paths() const {
    std::vector<std::string> out;
    for (const auto& f : files_) out.push_back(f.first.string());
    return out;
  }

  void commit() {
    std::vector<fs::path> written;
    try {
      for (const auto& [path, content] : files_) {
        write_file_atomic(path, content);
        written.push_back(path);
      }
    } catch (...) {
      std::error_code ec;
      for (const auto& p : written) fs::remove(p, ec);
      throw;
    }
  }

 private:
  std::vector<std::pair<fs::path, std::string>> files_;
};

struct RunManifest {
  explicit RunManifest(std::string cmd) : command(std::move(cmd)) {}

  std::string command;
  json config = json::object();
  std::optional<std::uint64_t> seed;
  std::vector<std::string> inputs;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  json to_json(const std::vector<std::string>& outputs) const {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json j = {{"command", command},   {"config", config},          {"inputs", inputs},
              {"outputs", outputs},   {"tool_version", kToolVersion}, {"wall_clock_s", secs}};
    j["seed"] = seed ? json(*seed) : json(nullptr);
    return j;
  }
};

// Adds the manifest as the final output and commits everything.
void finish(Outputs& out, const RunManifest& run, const fs::path& manifest_path) {
  auto paths = out.paths();
  out.add_json(manifest_path, run.to_json(paths));
  out.commit();
  diag("info", "wrote " + std::to_string(paths.size() + 1) + " files", {{"command", run.command}});
}

fs::path sibling(const fs::path& file, const std::string& suffix) {
  fs::path p = file;
  p.replace_extension();
  p += suffix;
  return p;
}

std::string resolve_data(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kDataEnv); env != nullptr && *env != '\0') return env;
  throw CLI::ValidationError("--data", std::string("no dataset directory given and ") + kDataEnv + " is not set");
}

std::string driver_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "d%02zu", i);
  return buf;
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::string style = "mixed";
  int drivers = 1;
  int periods = 100;
  std::uint64_t seed = 0;
  std::string out;
  double noise = 0.05;
  std::string priors;
};

int cmd_gen_data(const GenDataArgs& a) {
  RunManifest run{"gen-data"};
  run.seed = a.seed;
  GeneratorOptions opt;
  opt.accel_noise_std = a.noise;
  if (!a.priors.empty()) {
    opt.priors = style_priors_from_json(read_json_file(a.priors));
    run.inputs.push_back(a.priors);
  }
  run.config = {{"style", a.style}, {"drivers", a.drivers}, {"periods", a.periods}, {"accel_noise_std", a.noise},
                {"priors", to_json(opt.priors)}};

  std::vector<DriverDataset> drivers;
  for (int i = 1; i <= a.drivers; ++i) {
    DrivingStyle style;
    if (a.style == "mixed") {
      style = i % 2 == 1 ? DrivingStyle::kAggressive : DrivingStyle::kConservative;
    } else {
      style = driving_style_from_string(a.style);
    }
    const auto id = driver_name(static_cast<std::size_t>(i));
    drivers.push_back(generate_synthetic_driver(style, static_cast<std::size_t>(a.periods),
                                                derive_seed(a.seed, static_cast<std::uint64_t>(i)), opt, id));
    diag("debug", "generated driver", {{"driver", id}, {"style", to_string(style)}});
  }
  // Dataset files are produced in memory first so nothing partial is left on failure.
  const fs::path dir = a.out;
  Outputs out;
  json list = json::array();
  for (const auto& d : drivers) {
    json files = json::array();
    for (std::size_t p = 0; p < d.periods.size(); ++p) {
      char name[32];
      std::snprintf(name, sizeof name, "p%03zu.csv", p);
      const fs::path rel = fs::path(d.driver_id) / name;
      out.add(dir / rel, period_csv(d.periods[p]));
      files.push_back(rel.generic_string());
    }
    json e = {{"driver_id", d.driver_id}, {"style", to_string(d.style)}, {"dt", d.dt()}, {"periods", files}};
    if (d.ground_truth) e["ground_truth"] = to_json(*d.ground_truth);
    list.push_back(e);
  }
  out.add_json(dir / kManifestName, {{"format", "cfrl-dataset"}, {"version", 1}, {"drivers", list}});
  finish(out, run, dir / "run_manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string model;
  std::string driver;
  std::string data;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  std::string out;
  int episodes = 0;
  int epochs = 0;
  double span = 0.4;
  std::string init;
};

std::string curves_csv(const std::vector<EpisodeRecord>& curves) {
  std::ostringstream os;
  os << "episode,reward_mean,rmspe_train,rmspe_test\n";
  for (const auto& r : curves) {
    os << r.episode << ',' << format_double(r.reward_mean) << ',' << format_double(r.rmspe_train) << ','
       << format_double(r.rmspe_test) << '\n';
  }
  return os.str();
}

std::string loss_csv(const std::vector<double>& history) {
  std::ostringstream os;
  os << "epoch,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) os << i << ',' << format_double(history[i]) << '\n';
  return os.str();
}

int cmd_train(const TrainArgs& a) {
  const ModelKind kind = model_kind_from_string(a.model);
  if (kind == ModelKind::kIdm) {
    throw CLI::ValidationError("--model", "use calibrate-idm for IDM parameters");
  }
  const std::string data = resolve_data(a.data);
  RunManifest run{"train"};
  run.seed = a.seed;
  run.inputs.push_back(data);
  const auto drivers = load_dataset(data);
  const DriverDataset& ds = find_driver(drivers, a.driver);
  const DatasetSplit split = split_calibration_validation(ds, a.split_seed);

  TrainedModel tm;
  tm.name = to_string(kind);
  tm.kind = kind;
  tm.calib_driver = ds.driver_id;
  tm.split_seed = a.split_seed;
  Outputs out;
  const fs::path model_path = a.out;
  json cfg = {{"model", a.model}, {"driver", a.driver}, {"split_seed", a.split_seed}};

  switch (kind) {
    case ModelKind::kDdpgS:
    case ModelKind::kDdpgV:
    case ModelKind::kDdpgVRT: {
      TrainConfig tc = ddpg_config_for(kind, a.seed);
      if (a.episodes > 0) tc.episodes = a.episodes;
      auto observer = [&](int ep, const DdpgModel& m) {
        diag("debug", "episode start", {{"episode", ep}, {"replay", m.replay.size()}});
      };
      TrainResult res;
      if (!a.init.empty()) {
        TrainedModel base = load_model(a.init);
        if (base.kind != kind) throw Error(ErrorCode::kInvalidArgument, "--init model kind differs from --model");
        run.inputs.push_back(a.init);
        cfg["init"] = a.init;
        res = retrain(std::get<DdpgModel>(std::move(base.body)), split.calibration, split.validation, tc, observer);
      } else {
        res = train(split.calibration, split.validation, tc, observer);
      }
      cfg["train"] = to_json(tc);
      cfg["best_episode"] = res.best_episode;
      diag("info", "training finished",
           {{"best_episode", res.best_episode}, {"initial_train", res.initial_train_rmspe},
            {"initial_test", res.initial_test_rmspe}});
      tm.body = std::move(res.model);
      out.add(sibling(model_path, ".curves.csv"), curves_csv(res.curves));
      break;
    }
    case ModelKind::kLoess:
      cfg["span"] = a.span;
      tm.body = LoessModel::fit(split.calibration, a.span);
      break;
    case ModelKind::kNNa: {
      NNaConfig nc;
      nc.seed = a.seed;
      if (a.epochs > 0) nc.epochs = a.epochs;
      cfg["epochs"] = nc.epochs;
      cfg["learning_rate"] = nc.learning_rate;
      NNaFit fit = nna_fit(acceleration_samples(split.calibration), nc);
      out.add(sibling(model_path, ".curves.csv"), loss_csv(fit.loss_history));
      tm.body = std::move(fit.model);
      break;
    }
    case ModelKind::kRnn: {
      RNNConfig rc;
      rc.seed = a.seed;
      if (a.epochs > 0) rc.epochs = a.epochs;
      cfg["epochs"] = rc.epochs;
      cfg["truncation"] = rc.truncation;
      cfg["learning_rate"] = rc.learning_rate;
      RNNFit fit = rnn_train(split.calibration, rc);
      cfg["best_epoch"] = fit.best_epoch;
      out.add(sibling(model_path, ".curves.csv"), loss_csv(fit.objective_history));
      tm.body = std::move(fit.model);
      break;
    }
    case ModelKind::kIdm:
      break;
  }
  run.config = cfg;
  out.add_json(model_path, to_json(tm));
  finish(out, run, sibling(model_path, ".manifest.json"));
  return 0;
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::string driver;
  std::string data;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  std::string out;
  int population = 300;
  int generations = 300;
  int runs = 12;
};

int cmd_calibrate(const CalibrateArgs& a) {
  const std::string data = resolve_data(a.data);
  RunManifest run{"calibrate-idm"};
  run.seed = a.seed;
  run.inputs.push_back(data);
  const auto drivers = load_dataset(data);
  const DriverDataset& ds = find_driver(drivers, a.driver);
  const DatasetSplit split = split_calibration_validation(ds, a.split_seed);
  GAConfig gc;
  gc.population = a.population;
  gc.max_generations = a.generations;
  gc.runs = a.runs;
  gc.seed = a.seed;
  const GAResult res = ga_calibrate_idm(split.calibration, gc);
  diag("info", "calibration finished", {{"fitness", res.fitness}, {"best_run", res.best_run}});

  run.config = {{"driver", a.driver}, {"split_seed", a.split_seed}, {"ga", to_json(gc)},
                {"fitness", res.fitness}, {"best_run", res.best_run}};
  Outputs out;
  const fs::path path = a.out;
  out.add_json(path, to_json(res.best));
  std::ostringstream hist;
  hist << "run,generation,best_fitness\n";
  for (std::size_t r = 0; r < res.runs.size(); ++r) {
    for (std::size_t g = 0; g < res.runs[r].history.size(); ++g) {
      hist << r << ',' << g + 1 << ',' << format_double(res.runs[r].history[g]) << '\n';
    }
  }
  out.add(sibling(path, ".history.csv"), hist.str());
  // A model wrapper so evaluate can place the parameters in the protocol.
  TrainedModel tm{"idm", ModelKind::kIdm, ds.driver_id, a.split_seed, res.best};
  out.add_json(sibling(path, ".model.json"), to_json(tm));
  finish(out, run, sibling(path, ".manifest.json"));
  return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::vector<std::string> models;
  std::string data;
  std::string mode = "compare";
  std::string out;
};

std::vector<DriverDataset> drivers_for(const std::vector<DriverDataset>& all, const std::vector<TrainedModel>& models) {
  std::vector<DriverDataset> out;
  std::set<std::string> seen;
  for (const auto& m : models) {
    if (m.calib_driver.empty()) throw Error(ErrorCode::kInvalidArgument, "model '" + m.name + "' has no calibration driver");
    if (seen.insert(m.calib_driver).second) out.push_back(find_driver(all, m.calib_driver));
  }
  return out;
}

std::uint64_t common_split_seed(const std::vector<TrainedModel>& models) {
  for (const auto& m : models) {
    if (m.split_seed != models.front().split_seed) {
      throw Error(ErrorCode::kInvalidArgument, "models were trained with different split seeds");
    }
  }
  return models.front().split_seed;
}

int cmd_evaluate(const EvaluateArgs& a) {
  const std::string data = resolve_data(a.data);
  RunManifest run{"evaluate"};
  run.inputs.push_back(data);
  run.config = {{"mode", a.mode}};
  std::vector<TrainedModel> models;
  for (const auto& f : a.models) {
    models.push_back(load_model(f));
    run.inputs.push_back(f);
  }
  const auto all = load_dataset(data);
  const std::uint64_t split_seed = common_split_seed(models);
  run.config["split_seed"] = split_seed;
  const fs::path dir = a.out;
  Outputs out;

  if (a.mode == "intra") {
    std::vector<EvalRow> rows;
    for (const auto& m : models) {
      const auto e = intra_driver_validate(m.policy(), find_driver(all, m.calib_driver), m.split_seed);
      rows.push_back({m.name, m.calib_driver, m.calib_driver, e.spacing, e.speed});
    }
    out.add(dir / "intra.csv", eval_rows_csv(rows));
  } else if (a.mode == "inter") {
    const auto drivers = drivers_for(all, models);
    if (drivers.size() != models.size()) throw Error(ErrorCode::kInvalidArgument, "inter mode needs one model per driver");
    std::vector<Policy> policies;
    for (const auto& m : models) policies.push_back(m.policy());
    const ErrorMatrix m = inter_driver_validate(policies, drivers, split_seed);
    out.add(dir / "spacing_matrix.csv", error_matrix_csv(m, Quantity::kSpacing));
    out.add(dir / "speed_matrix.csv", error_matrix_csv(m, Quantity::kSpeed));
    out.add_json(dir / "matrix.json", to_json(m));
  } else if (a.mode == "compare") {
    const auto drivers = drivers_for(all, models);
    std::map<std::string, std::map<std::string, Policy>> grouped;
    std::vector<std::string> names;
    for (const auto& m : models) {
      if (!grouped.count(m.name)) names.push_back(m.name);
      if (!grouped[m.name].emplace(m.calib_driver, m.policy()).second) {
        throw Error(ErrorCode::kInvalidArgument, "two '" + m.name + "' models for driver " + m.calib_driver);
      }
    }
    std::vector<ModelSet> sets;
    for (const auto& n : names) {
      ModelSet s{n, {}};
      for (const auto& d : drivers) {
        auto it = grouped[n].find(d.driver_id);
        if (it == grouped[n].end()) {
          throw Error(ErrorCode::kInvalidArgument, "model '" + n + "' is missing driver " + d.driver_id);
        }
        s.per_driver.push_back(it->second);
      }
      sets.push_back(std::move(s));
    }
    const EvalReport report = compare_models(sets, drivers, split_seed);
    out.add(dir / "report.csv", eval_rows_csv(report.rows));
    std::ostringstream sum;
    sum << "model,intra_spacing_mean,intra_spacing_std,intra_speed_mean,intra_speed_std,"
           "inter_spacing_mean,inter_spacing_std,inter_speed_mean,inter_speed_std\n";
    for (const auto& s : report.summary) {
      sum << s.model << ',' << format_double(s.intra_spacing_mean) << ',' << format_double(s.intra_spacing_std) << ','
          << format_double(s.intra_speed_mean) << ',' << format_double(s.intra_speed_std) << ','
          << format_double(s.inter_spacing_mean) << ',' << format_double(s.inter_spacing_std) << ','
          << format_double(s.inter_speed_mean) << ',' << format_double(s.inter_speed_std) << '\n';
    }
    out.add(dir / "summary.csv", sum.str());
    out.add_json(dir / "report.json", to_json(report));
  } else {
    throw CLI::ValidationError("--mode", "expected intra, inter or compare");
  }
  finish(out, run, dir / "run_manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string model;
  std::string period;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
  RunManifest run{"simulate"};
  run.inputs = {a.model, a.period};
  run.config = {{"model", a.model}};
  const CFPeriod period = read_period_csv(a.period);
  Policy policy;
  if (a.model == "replay") {
    policy = replay_policy(period);
  } else {
    policy = load_model(a.model).policy();
  }
  const SimTrajectory traj = run_episode(policy, period, period.dt);
  const double final_action = traj.collided ? 0.0 : clamp_action(policy(period.size() - 1, traj.states.back()));
  if (traj.collided) diag("warning", "simulated follower collided", {{"steps", traj.actions.size()}});
  Outputs out;
  out.add(a.out, trajectory_csv(traj, period, final_action));
  finish(out, run, sibling(a.out, ".manifest.json"));
  return 0;
}

// ---------------------------------------------------------------------------

struct ExtractArgs {
  std::string raw;
  std::string out;
  double dt = kDefaultDt;
  std::string driver = "d01";
};

int cmd_extract(const ExtractArgs& a) {
  RunManifest run{"extract"};
  run.inputs = {a.raw};
  run.config = {{"dt", a.dt}, {"driver", a.driver}};
  const auto log = parse_raw_log_csv(read_file(a.raw));
  const auto periods = extract_periods(log, a.dt, a.driver);
  if (periods.empty()) diag("warning", "no car-following period satisfied the extraction filter", {{"rows", log.size()}});
  diag("info", "extracted periods", {{"count", periods.size()}});

  const fs::path dir = a.out;
  Outputs out;
  json files = json::array();
  for (std::size_t p = 0; p < periods.size(); ++p) {
    char name[32];
    std::snprintf(name, sizeof name, "p%03zu.csv", p);
    const fs::path rel = fs::path(a.driver) / name;
    out.add(dir / rel, period_csv(periods[p]));
    files.push_back(rel.generic_string());
  }
  const json entry = {{"driver_id", a.driver}, {"style", "unknown"}, {"dt", a.dt}, {"periods", files}};
  out.add_json(dir / kManifestName,
               {{"format", "cfrl-dataset"}, {"version", 1}, {"drivers", periods.empty() ? json::array() : json::array({entry})}});
  finish(out, run, dir / "run_manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------

struct ClusterArgs {
  std::string data;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_cluster(const ClusterArgs& a) {
  const std::string data = resolve_data(a.data);
  RunManifest run{"cluster"};
  run.seed = a.seed;
  run.inputs = {data};
  const auto drivers = load_dataset(data);
  const ClusteringResult res = cluster_driving_styles(drivers, a.seed);
  json list = json::array();
  std::size_t agree = 0, known = 0;
  for (std::size_t i = 0; i < drivers.size(); ++i) {
    list.push_back({{"driver_id", drivers[i].driver_id},
                    {"label", to_string(res.labels[i])},
                    {"dataset_style", to_string(drivers[i].style)},
                    {"features", res.features[i]},
                    {"mean_time_gap", mean_time_gap(drivers[i].periods)}});
    if (drivers[i].style != DrivingStyle::kUnknown) {
      ++known;
      if (drivers[i].style == res.labels[i]) ++agree;
    }
  }
  json doc = {{"drivers", list}, {"inertia", res.kmeans.inertia}};
  if (known > 0) doc["agreement"] = static_cast<double>(agree) / static_cast<double>(known);
  run.config = {{"k", 2}, {"restarts", 10}};
  Outputs out;
  out.add_json(a.out, doc);
  finish(out, run, sibling(a.out, ".manifest.json"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Car-following model learning and evaluation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false, verbose = false;
  app.add_flag("-q,--quiet", quiet, "Only report errors on stderr");
  app.add_flag("-v,--verbose", verbose, "Report per-step progress on stderr");
  app.set_version_flag("--version", kToolVersion);

  int status = 0;
  auto guard = [&status](auto fn) {
    return [&status, fn]() { status = fn(); };
  };

  GenDataArgs gd;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic driver population");
  gen->add_option("--style", gd.style, "aggressive, conservative or mixed")
      ->check(CLI::IsMember({"aggressive", "conservative", "mixed"}));
  gen->add_option("--drivers", gd.drivers, "Number of drivers")->check(CLI::PositiveNumber);
  gen->add_option("--periods", gd.periods, "Periods per driver")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gd.seed, "Master seed");
  gen->add_option("--out", gd.out, "Output dataset directory")->required();
  gen->add_option("--noise", gd.noise, "Follower acceleration noise std (m/s^2)")->check(CLI::NonNegativeNumber);
  gen->add_option("--priors", gd.priors, "Style prior JSON file")->check(CLI::ExistingFile);
  gen->callback(guard([&] { return cmd_gen_data(gd); }));

  TrainArgs tr;
  auto* trn = app.add_subcommand("train", "Train a data-driven car-following model");
  trn->add_option("--model", tr.model, "ddpgs, ddpgv, ddpgvrt, nna, rnn or loess")->required();
  trn->add_option("--driver", tr.driver, "Driver id")->required();
  trn->add_option("--data", tr.data, std::string("Dataset directory (default $") + kDataEnv + ")");
  trn->add_option("--seed", tr.seed, "Master seed");
  trn->add_option("--split-seed", tr.split_seed, "Seed of the 70/30 calibration/validation split");
  trn->add_option("--out", tr.out, "Model JSON file")->required();
  trn->add_option("--episodes", tr.episodes, "DDPG episodes (default 60)")->check(CLI::PositiveNumber);
  trn->add_option("--epochs", tr.epochs, "NNa/RNN epochs")->check(CLI::PositiveNumber);
  trn->add_option("--span", tr.span, "Loess span")->check(CLI::Range(1e-9, 1.0));
  trn->add_option("--init", tr.init, "Existing DDPG model to retrain")->check(CLI::ExistingFile);
  trn->callback(guard([&] { return cmd_train(tr); }));

  CalibrateArgs ca;
  auto* cal = app.add_subcommand("calibrate-idm", "Calibrate IDM parameters with a genetic algorithm");
  cal->add_option("--driver", ca.driver, "Driver id")->required();
  cal->add_option("--data", ca.data, "Dataset directory");
  cal->add_option("--seed", ca.seed, "Master seed");
  cal->add_option("--split-seed", ca.split_seed, "Seed of the 70/30 split");
  cal->add_option("--out", ca.out, "IDM parameter JSON file")->required();
  cal->add_option("--population", ca.population, "GA population")->check(CLI::Range(2, 1000000));
  cal->add_option("--generations", ca.generations, "Maximum generations")->check(CLI::PositiveNumber);
  cal->add_option("--runs", ca.runs, "Independent GA runs")->check(CLI::PositiveNumber);
  cal->callback(guard([&] { return cmd_calibrate(ca); }));

  EvaluateArgs ev;
  auto* eva = app.add_subcommand("evaluate", "Intra-/inter-driver validation and model comparison");
  eva->add_option("--models", ev.models, "Model files")->required()->check(CLI::ExistingFile);
  eva->add_option("--data", ev.data, "Dataset directory");
  eva->add_option("--mode", ev.mode, "intra, inter or compare")->check(CLI::IsMember({"intra", "inter", "compare"}));
  eva->add_option("--out", ev.out, "Output directory")->required();
  eva->callback(guard([&] { return cmd_evaluate(ev); }));

  SimulateArgs si;
  auto* sim = app.add_subcommand("simulate", "Roll a model out over one period");
  sim->add_option("--model", si.model, "Model file, or 'replay' for the recorded accelerations")->required();
  sim->add_option("--period", si.period, "Period CSV")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", si.out, "Trajectory CSV")->required();
  sim->callback(guard([&] { return cmd_simulate(si); }));

  ExtractArgs ex;
  auto* ext = app.add_subcommand("extract", "Extract car-following periods from a raw radar log");
  ext->add_option("--raw", ex.raw, "Raw log CSV")->required()->check(CLI::ExistingFile);
  ext->add_option("--out", ex.out, "Output dataset directory")->required();
  ext->add_option("--dt", ex.dt, "Resampling step (s)")->check(CLI::PositiveNumber);
  ext->add_option("--driver", ex.driver, "Driver id for the extracted periods");
  ext->callback(guard([&] { return cmd_extract(ex); }));

  ClusterArgs cl;
  auto* clu = app.add_subcommand("cluster", "Label drivers aggressive/conservative with k-means");
  clu->add_option("--data", cl.data, "Dataset directory");
  clu->add_option("--seed", cl.seed, "Seed for k-means restarts");
  clu->add_option("--out", cl.out, "Labels JSON file")->required();
  clu->callback(guard([&] { return cmd_cluster(cl); }));

  app.parse_complete_callback([&] {
    g_verbosity = quiet ? Verbosity::kQuiet : (verbose ? Verbosity::kVerbose : Verbosity::kNormal);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const cfrl::Error& e) {
    diag("error", e.what(), {{"code", to_string(e.code())}});
    return e.code() == ErrorCode::kInvalidArgument ? 2 : 1;
  } catch (const std::exception& e) {
    diag("error", e.what());
    return 1;
  }
  return status;
}
