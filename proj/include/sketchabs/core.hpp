#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sketchabs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// k x d matrix embedding of a sketch or photo. Row 0 is the coarsest.
using FeatureMatrix = Matrix;

/// B x B matrix; entry (i, j) is the distance between sketch i and photo j.
using DistanceMatrix = Matrix;

/// Bad argument, shape or value supplied by the caller.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure during a computation (NaN gradient, diverged loss).
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed, mismatched or unreadable file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kStructuralRows = 9;
inline constexpr int kLatentRows = 14;
inline constexpr int kLevels = 3;

using GroupSizes = std::array<int, kLevels>;

struct EmbeddingConfig {
  int d = 16;
  int k_struct = kStructuralRows;
  int k_total = kLatentRows;
  GroupSizes group_sizes{3, 3, 3};

  void validate() const;
};

/// 9-element 0/1 (or soft) row weights.
using RowMask = Eigen::Matrix<double, kStructuralRows, 1>;

inline RowMask full_mask() { return RowMask::Ones(); }

bool all_finite(const Matrix& m);

/// Scales every nonzero row to unit Euclidean norm; zero rows stay zero.
FeatureMatrix row_l2_normalize(const FeatureMatrix& m);

/// Vector-Jacobian product of row_l2_normalize. `raw` is the input that was
/// normalized, `grad_out` the gradient w.r.t. the normalized output.
FeatureMatrix row_l2_normalize_backward(const FeatureMatrix& raw,
                                        const FeatureMatrix& grad_out);

/// sqrt(sum_r mask[r] * ||m1_r - m2_r||^2). An omitted mask means all rows.
double matrix_distance(const FeatureMatrix& m1, const FeatureMatrix& m2,
                       const std::optional<RowMask>& mask = std::nullopt);

/// Partial derivatives of matrix_distance. At zero distance all partials are
/// taken as zero.
struct DistanceGrad {
  double value = 0.0;
  FeatureMatrix d_m1;
  FeatureMatrix d_m2;
  RowMask d_mask = RowMask::Zero();
};

DistanceGrad matrix_distance_grad(const FeatureMatrix& m1, const FeatureMatrix& m2,
                                  const RowMask& mask);

/// Entry (i, j) = matrix_distance(sketches[i], photos[j], masks[i]).
DistanceMatrix pairwise_batch_distances(std::span<const FeatureMatrix> sketches,
                                        std::span<const FeatureMatrix> photos,
                                        std::span<const RowMask> masks);

}  // namespace sketchabs
