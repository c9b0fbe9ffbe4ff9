#pragma once

// nlohmann::json conversions for the on-disk records. Internal to the library.

#include <json.hpp>

#include "model.hpp"

namespace azoo {

nlohmann::json to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ModelMeta& meta);
ModelMeta meta_from_json(const nlohmann::json& j);

}  // namespace azoo
