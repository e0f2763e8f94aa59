#pragma once

#include <json.hpp>

#include "pvae/generator.hpp"
#include "pvae/model.hpp"
#include "pvae/trainer.hpp"

namespace pvae {

// JSON mirrors of the config structs, shared by the checkpoint header and
// the CLI config file. Parsers fill only the keys present and reject keys
// they do not know.

nlohmann::json to_json(const ModelConfig& c);
void from_json_into(const nlohmann::json& j, ModelConfig& c);

nlohmann::json to_json(const TrainConfig& c);
void from_json_into(const nlohmann::json& j, TrainConfig& c);

nlohmann::json to_json(const GenerationRequest& r);  // defaults only, no input
void from_json_into(const nlohmann::json& j, GenerationRequest& r);

}  // namespace pvae
