#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "hdrgs/dataset.hpp"
#include "hdrgs/trainer.hpp"

namespace hdrgs {

/// Flat key/value view of a configuration struct. Keys are dotted
/// ("lr.opacity", "loss.lambda2", "crf.gamma").
nlohmann::json to_flat_json(const TrainConfig& cfg);
nlohmann::json to_flat_json(const SceneSpec& spec);

/// Applies every key of `flat`; throws ConfigError naming the first key
/// that is unknown or has the wrong type.
void apply_flat_json(TrainConfig& cfg, const nlohmann::json& flat);
void apply_flat_json(SceneSpec& spec, const nlohmann::json& flat);

/// Parses a flag value using the type of the key's current value.
nlohmann::json parse_flag_value(const nlohmann::json& current, const std::string& text);

std::vector<std::string> config_keys(const TrainConfig& cfg);
std::vector<std::string> config_keys(const SceneSpec& spec);

}  // namespace hdrgs
