#pragma once

#include <json.hpp>

#include "pki/data.hpp"
#include "pki/trainer.hpp"

namespace pki::detail {

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SessionLayout& layout);
SessionLayout layout_from_json(const nlohmann::json& j);

}  // namespace pki::detail
