#pragma once

#include <random>

#include "sketchabs/core.hpp"

namespace sketchabs {

using Vec3 = Eigen::Vector3d;

enum class AbstractionLevel { kCoarse = 0, kMid = 1, kFine = 2 };

/// Ground-truth completion fraction used to render each level.
double completion_of(AbstractionLevel level);
const char* level_name(AbstractionLevel level);
Vec3 one_hot(AbstractionLevel level);
AbstractionLevel argmax_level(const Vec3& v);

Vec3 softmax(const Vec3& logits);

/// Affine map from the pooled sketch feature to 3 level logits.
struct AbstractionHead {
  Eigen::Matrix<double, kLevels, Eigen::Dynamic, Eigen::RowMajor> weight;
  Vec3 bias = Vec3::Zero();

  static AbstractionHead zeros(int in_dim);
};

Vec3 abstraction_head_forward(const Vector& pooled, const AbstractionHead& head);

/// One relaxed categorical draw. `value` is what the forward pass sees: the
/// soft sample, or its one-hot argmax in hard mode. The backward pass always
/// uses the soft sample (straight-through).
struct GumbelSample {
  Vec3 value;
  Vec3 soft;
  Vec3 noise;
  double temperature = 1.0;
  bool hard = true;
};

Vec3 sample_gumbel_noise(std::mt19937_64& rng);

GumbelSample gumbel_argmax(const Vec3& logits, double temperature, bool hard,
                           std::mt19937_64& rng);

/// Same as above with caller-supplied noise (used to freeze draws).
GumbelSample gumbel_argmax_with_noise(const Vec3& logits, const Vec3& noise,
                                      double temperature, bool hard);

/// d(loss)/d(logits) given d(loss)/d(sample.value), via the soft Jacobian.
Vec3 gumbel_backward(const GumbelSample& sample, const Vec3& grad_value);

/// flip(cumsum(flip(a))): entry j = sum_{i >= j} a[i].
Vec3 build_selection_mask(const Vec3& a_hat);
Vec3 build_selection_mask_backward(const Vec3& grad_mask3);

RowMask expand_mask(const Vec3& mask3, const GroupSizes& group_sizes);
Vec3 expand_mask_backward(const RowMask& grad_mask9, const GroupSizes& group_sizes);

/// Row r scaled by mask9[r].
FeatureMatrix apply_mask(const FeatureMatrix& m, const RowMask& mask9);

/// Hard mask for a level: rows of every group up to and including `level`.
RowMask level_mask(AbstractionLevel level, const GroupSizes& group_sizes);

/// Number of leading rows switched on by a binary prefix mask.
int active_rows(const RowMask& mask9);

}  // namespace sketchabs
