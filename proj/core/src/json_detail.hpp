#pragma once

#include "json.hpp"

#include "dreamif/degrade.hpp"
#include "dreamif/model.hpp"
#include "dreamif/trainer.hpp"

// Internal JSON <-> struct bridges. The vendored JSON library stays out of the
// public headers; these helpers are shared by the string-based conversion
// functions and the checkpoint reader/writer.

namespace dreamif::detail {

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json degradation_spec_to_json(const DegradationSpec& spec);
DegradationSpec degradation_spec_from_json(const nlohmann::json& j);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace dreamif::detail
