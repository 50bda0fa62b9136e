#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "cfrl/ddpg.hpp"
#include "cfrl/idm.hpp"
#include "cfrl/loess.hpp"
#include "cfrl/nna.hpp"
#include "cfrl/rnn.hpp"

namespace cfrl {

/// Model families selectable from the command line.
enum class ModelKind { kDdpgS, kDdpgV, kDdpgVRT, kIdm, kLoess, kNNa, kRnn };

const char* to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& name);
/// Comma-separated list of valid names, for diagnostics.
std::string model_kind_names();

/// Training configuration implied by a DDPG family name.
TrainConfig ddpg_config_for(ModelKind k, std::uint64_t seed);

struct TrainedModel {
  std::string name;  // display name, usually to_string(kind)
  ModelKind kind = ModelKind::kIdm;
  std::string calib_driver;
  std::uint64_t split_seed = 0;
  std::variant<DdpgModel, IDMParams, LoessModel, NNaModel, RNNModel> body;

  Policy policy() const;
};

nlohmann::json to_json(const TrainedModel& m);
TrainedModel trained_model_from_json(const nlohmann::json& j);

void save_model(const std::filesystem::path& path, const TrainedModel& m);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace cfrl
