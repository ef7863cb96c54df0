#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "sketchabs/digest.hpp"
#include "sketchabs/synth_data.hpp"
#include "sketchabs/train.hpp"

namespace sketchabs {

/// Everything a run needs. Loaded from a JSON file with sections
/// "data", "model", "train", "accq", "weights", "triplet", "generator".
/// Unknown keys are rejected.
struct RunConfig {
  DataConfig data;
  TrainConfig train;

  void validate() const;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

/// Digest of the full canonical config.
std::string config_digest(const RunConfig& config);

/// Digest of the data-shape parameters (seed excluded; it is recorded
/// separately in the manifest).
std::string data_config_digest(const DataConfig& data);

nlohmann::json data_config_json(const DataConfig& data);

}  // namespace sketchabs
