#include "cfrl/models.hpp"

#include <array>
#include <utility>

#include "cfrl/error.hpp"
#include "cfrl/io.hpp"

namespace cfrl {

namespace {

constexpr std::array<std::pair<ModelKind, const char*>, 7> kKinds{{
    {ModelKind::kDdpgS, "ddpgs"},
    {ModelKind::kDdpgV, "ddpgv"},
    {ModelKind::kDdpgVRT, "ddpgvrt"},
    {ModelKind::kIdm, "idm"},
    {ModelKind::kLoess, "loess"},
    {ModelKind::kNNa, "nna"},
    {ModelKind::kRnn, "rnn"},
}};

bool is_ddpg(ModelKind k) { return k == ModelKind::kDdpgS || k == ModelKind::kDdpgV || k == ModelKind::kDdpgVRT; }

}  // namespace

const char* to_string(ModelKind k) {
  for (const auto& [kind, name] : kKinds) {
    if (kind == k) return name;
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& name) {
  for (const auto& [kind, n] : kKinds) {
    if (name == n) return kind;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown model '" + name + "' (valid: " + model_kind_names() + ")");
}

std::string model_kind_names() {
  std::string out;
  for (const auto& [kind, name] : kKinds) {
    if (!out.empty()) out += ", ";
    out += name;
  }
  return out;
}

TrainConfig ddpg_config_for(ModelKind k, std::uint64_t seed) {
  if (!is_ddpg(k)) throw Error(ErrorCode::kInvalidArgument, std::string(to_string(k)) + " is not a DDPG model");
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.reward_mode = k == ModelKind::kDdpgS ? RewardMode::kSpacing : RewardMode::kSpeed;
  cfg.rt_window = k == ModelKind::kDdpgVRT ? 10 : 1;
  return cfg;
}

Policy TrainedModel::policy() const {
  return std::visit(
      [](const auto& b) -> Policy {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, IDMParams>) {
          return idm_policy(b);
        } else {
          return b.policy();
        }
      },
      body);
}

nlohmann::json to_json(const TrainedModel& m) {
  nlohmann::json j = {{"format", "cfrl-model"},
                      {"version", 1},
                      {"name", m.name},
                      {"kind", to_string(m.kind)},
                      {"calib_driver", m.calib_driver},
                      {"split_seed", m.split_seed}};
  std::visit([&j](const auto& b) { j["model"] = to_json(b); }, m.body);
  return j;
}

TrainedModel trained_model_from_json(const nlohmann::json& j) {
  TrainedModel m;
  if (j.is_object() && !j.contains("format") && j.contains("a_max")) {
    // Bare IDM parameter file.
    m.kind = ModelKind::kIdm;
    m.name = "idm";
    m.body = idm_params_from_json(j);
    return m;
  }
  try {
    if (j.at("format") != "cfrl-model") throw Error(ErrorCode::kFormat, "not a cfrl-model document");
    if (j.at("version") != 1) throw Error(ErrorCode::kFormat, "unsupported model version");
    m.kind = model_kind_from_string(j.at("kind").get<std::string>());
    m.name = j.value("name", std::string(to_string(m.kind)));
    m.calib_driver = j.value("calib_driver", std::string());
    m.split_seed = j.value("split_seed", std::uint64_t{0});
    const auto& b = j.at("model");
    switch (m.kind) {
      case ModelKind::kDdpgS:
      case ModelKind::kDdpgV:
      case ModelKind::kDdpgVRT:
        m.body = ddpg_model_from_json(b);
        break;
      case ModelKind::kIdm:
        m.body = idm_params_from_json(b);
        break;
      case ModelKind::kLoess:
        m.body = loess_model_from_json(b);
        break;
      case ModelKind::kNNa:
        m.body = nna_model_from_json(b);
        break;
      case ModelKind::kRnn:
        m.body = rnn_model_from_json(b);
        break;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("model JSON: ") + e.what());
  }
  return m;
}

void save_model(const std::filesystem::path& path, const TrainedModel& m) { write_json_file(path, to_json(m)); }

TrainedModel load_model(const std::filesystem::path& path) {
  try {
    return trained_model_from_json(read_json_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace cfrl
