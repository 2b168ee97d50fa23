#pragma once

#include <filesystem>
#include <string>

#include "dfeia/network.hpp"

#include <json.hpp>

namespace dfeia {

// NetworkConfig <-> JSON with lower_snake_case field names. Missing fields
// keep their defaults; unknown keys are rejected.
nlohmann::json config_to_json(const NetworkConfig& cfg);
NetworkConfig config_from_json(const nlohmann::json& j);
NetworkConfig load_config_file(const std::filesystem::path& path);

std::string to_string(BlockKind k);
std::string to_string(MbmsVariant v);
std::string to_string(AttentionVariant v);

}  // namespace dfeia
