#pragma once

#include <filesystem>
#include <string>

#include "awemixer/model.hpp"
#include "awemixer/train.hpp"
#include "json.hpp"

namespace awemixer {

nlohmann::json to_json(const ModelConfig& config);
/// Missing keys keep their defaults; unknown keys or wrong types throw ConfigError.
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// FNV-1a 64 of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

/// Layout: "AWEM1", uint64 LE header length, JSON header (config, tensor names and shapes),
/// then every tensor as little-endian f64 in header order.
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, ModelParams& params);
/// Throws DataError if unreadable, ParseError if the bytes do not match the layout.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace awemixer
