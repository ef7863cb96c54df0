#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sketchabs/abstraction_mask.hpp"
#include "sketchabs/core.hpp"

namespace sketchabs {

struct ModelConfig {
  int hidden = 64;
  /// Backbone feature width is d * feature_groups.
  int feature_groups = 2;
  EmbeddingConfig embedding;

  void validate() const;
};

struct AffineLayer {
  Matrix weight;  // out x in
  Vector bias;    // out

  Vector apply(const Vector& x) const { return weight * x + bias; }
};

enum class Branch { kSketch, kPhoto };

/// Non-owning view of one parameter tensor, for generic passes
/// (serialization, optimizer, finite differences).
struct TensorView {
  std::string name;
  std::string group;
  double* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
};

/// Shared backbone, 9 embedding heads per branch, and the abstraction head.
struct ModelParams {
  int d_obs = 0;
  ModelConfig config;
  AffineLayer backbone_in;   // d_obs -> hidden, tanh
  AffineLayer backbone_out;  // hidden -> d * feature_groups, tanh
  std::array<AffineLayer, kStructuralRows> sketch_heads;
  std::array<AffineLayer, kStructuralRows> photo_heads;
  AbstractionHead abs_head;

  int d() const { return config.embedding.d; }
  int feature_dim() const { return config.embedding.d * config.feature_groups; }

  /// Fixed declaration order; defines the checkpoint layout.
  std::vector<TensorView> tensors();
  std::vector<std::pair<std::string, Eigen::Index>> tensor_shapes() const;

  ModelParams zeros_like() const;
  std::size_t parameter_count() const;
  bool all_finite() const;

  bool operator==(const ModelParams& other) const;
};

/// Seeded Gaussian init; every value is then rounded to float32.
ModelParams init_params(int d_obs, const ModelConfig& config, std::uint64_t seed);

/// All weights zero.
ModelParams zero_params(int d_obs, const ModelConfig& config);

/// Round every parameter to the nearest float32 (the checkpoint precision).
void round_to_float(ModelParams& params);

struct BranchCache {
  Vector input;
  Vector hidden;
  Vector feature;
  FeatureMatrix raw;    // head outputs before normalization
  FeatureMatrix embed;  // row-normalized
  Vector pooled;        // mean over feature groups
};

/// Runs one observation through the backbone and a branch's heads.
BranchCache forward(const ModelParams& params, const Vector& input, Branch branch);

/// Accumulates parameter gradients for one forward pass into `grads` given
/// d loss / d embed and d loss / d pooled (pass an empty vector to skip).
void backward(const ModelParams& params, const BranchCache& cache, Branch branch,
              const FeatureMatrix& d_embed, const Vector& d_pooled, ModelParams& grads);

enum class OptimizerKind { kAdam, kSgd };

struct Optimizer {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  ModelParams first_moment;
  ModelParams second_moment;

  Optimizer(OptimizerKind kind, double lr, const ModelParams& like);

  /// params -= update(grads), then rounds params to float32.
  void apply(ModelParams& params, ModelParams& grads);
};

}  // namespace sketchabs
