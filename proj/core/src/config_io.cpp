#include "dfeia/config_io.hpp"

#include <fstream>
#include <set>

namespace dfeia {

std::string to_string(BlockKind k) { return k == BlockKind::msfd ? "msfd" : "msia"; }
std::string to_string(MbmsVariant v) { return v == MbmsVariant::dilated ? "dilated" : "large_kernel"; }
std::string to_string(AttentionVariant v) {
  return v == AttentionVariant::interaction ? "interaction" : "traditional";
}

static BlockKind block_kind_from(const std::string& s) {
  if (s == "msfd") return BlockKind::msfd;
  if (s == "msia") return BlockKind::msia;
  throw ConfigError("config: block_plan entry must be \"msfd\" or \"msia\", got \"" + s + "\"");
}

static MbmsVariant mbms_from(const std::string& s) {
  if (s == "dilated") return MbmsVariant::dilated;
  if (s == "large_kernel") return MbmsVariant::large_kernel;
  throw ConfigError("config: mbms_variant must be \"dilated\" or \"large_kernel\", got \"" + s + "\"");
}

static AttentionVariant attention_from(const std::string& s) {
  if (s == "interaction") return AttentionVariant::interaction;
  if (s == "traditional") return AttentionVariant::traditional;
  throw ConfigError("config: attention_variant must be \"interaction\" or \"traditional\", got \"" + s + "\"");
}

nlohmann::json config_to_json(const NetworkConfig& cfg) {
  nlohmann::json j;
  j["stage_depths"] = cfg.stage_depths;
  j["stage_channels"] = cfg.stage_channels;
  j["num_classes"] = cfg.num_classes;
  j["adw_kernel"] = cfg.adw_kernel;
  j["mbms_variant"] = to_string(cfg.mbms_variant);
  j["attention_variant"] = to_string(cfg.attention_variant);
  nlohmann::json plan = nlohmann::json::array();
  for (BlockKind k : cfg.block_plan) plan.push_back(to_string(k));
  j["block_plan"] = plan;
  j["input_size"] = cfg.input_size;
  return j;
}

NetworkConfig config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "stage_depths", "stage_channels", "num_classes",    "adw_kernel",
      "mbms_variant", "attention_variant", "block_plan",  "input_size"};
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("config: unknown key \"" + it.key() + "\"");
  }

  NetworkConfig cfg;
  try {
    if (j.contains("stage_depths")) {
      auto v = j.at("stage_depths").get<std::vector<int>>();
      if (v.size() != 4) throw ConfigError("config: stage_depths must have 4 entries");
      std::copy(v.begin(), v.end(), cfg.stage_depths.begin());
    }
    if (j.contains("stage_channels")) {
      auto v = j.at("stage_channels").get<std::vector<int64_t>>();
      if (v.size() != 4) throw ConfigError("config: stage_channels must have 4 entries");
      std::copy(v.begin(), v.end(), cfg.stage_channels.begin());
    }
    if (j.contains("num_classes")) cfg.num_classes = j.at("num_classes").get<int64_t>();
    if (j.contains("adw_kernel")) cfg.adw_kernel = j.at("adw_kernel").get<int>();
    if (j.contains("mbms_variant")) cfg.mbms_variant = mbms_from(j.at("mbms_variant").get<std::string>());
    if (j.contains("attention_variant")) {
      cfg.attention_variant = attention_from(j.at("attention_variant").get<std::string>());
    }
    if (j.contains("block_plan")) {
      auto v = j.at("block_plan").get<std::vector<std::string>>();
      if (v.size() != 4) throw ConfigError("config: block_plan must have 4 entries");
      for (int i = 0; i < 4; ++i) cfg.block_plan[i] = block_kind_from(v[i]);
    }
    if (j.contains("input_size")) cfg.input_size = j.at("input_size").get<int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: malformed value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

NetworkConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: invalid JSON in " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace dfeia
