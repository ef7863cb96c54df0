#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sketchabs/abstraction_mask.hpp"
#include "sketchabs/core.hpp"

namespace sketchabs {

struct DataConfig {
  int n_objects = 100;
  int d_z = 16;
  int d_obs = 32;
  double sigma = 0.1;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Latent coordinate c of the photo projection is scaled by
/// kEnergyDecay^(energy rank of c), so a few coordinates dominate.
inline constexpr double kEnergyDecay = 0.2;

struct SyntheticObject {
  int id = 0;
  Vector z;
  Vector photo_obs;
};

struct SketchObservation {
  int object_id = 0;
  double t = 1.0;
  AbstractionLevel level = AbstractionLevel::kFine;
  Vector obs;
};

struct Dataset {
  DataConfig config;
  Matrix photo_projection;   // d_obs x d_z
  Matrix sketch_projection;  // d_obs x d_z
  std::vector<int> stroke_order;
  std::vector<SyntheticObject> objects;
  int n_train = 0;

  std::span<const SyntheticObject> train() const;
  std::span<const SyntheticObject> test() const;
};

Dataset generate_dataset(const DataConfig& config);

/// 0/1 mask over latent coordinates with ceil(t * d_z) ones, taken in
/// stroke order.
Vector reveal_mask(double t, std::span<const int> stroke_order);

/// obs = S (z .* reveal(t)) + sigma * eps, with eps drawn from noise_seed.
SketchObservation render_partial_sketch(const Dataset& data, const SyntheticObject& object,
                                        double t, std::uint64_t noise_seed);

/// coarse below 0.45, mid below 0.80, fine otherwise.
AbstractionLevel assign_abstraction_label(double t);

/// Seed for an independent stream derived from (base, a, b).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

inline constexpr const char* kDatasetFile = "dataset.jsonl";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr int kDatasetFormatVersion = 1;

struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  std::string data_config_digest;
  std::string content_digest;
  std::uint64_t seed = 0;
  int n_objects = 0;
  int n_train = 0;
  int n_test = 0;
};

/// Writes dataset.jsonl and manifest.json into `dir`. Returns the manifest.
DatasetManifest write_dataset(const Dataset& data, const std::filesystem::path& dir);

/// Reads and verifies a dataset directory (content digest must match the
/// manifest).
Dataset read_dataset(const std::filesystem::path& dir, DatasetManifest* manifest = nullptr);

DatasetManifest read_manifest(const std::filesystem::path& dir);

}  // namespace sketchabs
