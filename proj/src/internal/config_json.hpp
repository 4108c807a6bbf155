#pragma once

#include <json.hpp>

#include "mript/model.hpp"

namespace mript::model::detail {

nlohmann::json to_json(const ModelConfig& config);
/// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
ModelConfig from_json(const nlohmann::json& j, ModelConfig base = ModelConfig::desk());

}  // namespace mript::model::detail
