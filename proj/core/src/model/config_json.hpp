#pragma once

#include "json.hpp"
#include "p2p/model/pressnet.hpp"

namespace p2p::model {

nlohmann::json config_to_json(const PressNetConfig& cfg);
/// Missing keys keep their defaults; the result is validated.
PressNetConfig config_from_json(const nlohmann::json& j);

}  // namespace p2p::model
