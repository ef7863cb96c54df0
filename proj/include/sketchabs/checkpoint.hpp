#pragma once

#include <filesystem>
#include <string>

#include "sketchabs/model.hpp"

namespace sketchabs {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  std::string config_digest;
  /// Content digest of the dataset the model was trained on.
  std::string data_digest;
};

/// Text header (magic, version, digests, shapes, tensor table) terminated by
/// "end_header\n", then every tensor as little-endian float32 in table order.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sketchabs
