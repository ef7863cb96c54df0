#include "sketchabs/core.hpp"

#include <cmath>
#include <numeric>

namespace sketchabs {

void EmbeddingConfig::validate() const {
  if (d <= 0) throw InvalidInput("embedding dimension d must be positive");
  if (k_struct != kStructuralRows) throw InvalidInput("k_struct must be 9");
  if (k_total != kLatentRows) throw InvalidInput("k_total must be 14");
  for (int g : group_sizes) {
    if (g <= 0) throw InvalidInput("group sizes must be positive");
  }
  if (std::accumulate(group_sizes.begin(), group_sizes.end(), 0) != k_struct) {
    throw InvalidInput("group sizes must sum to k_struct");
  }
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

FeatureMatrix row_l2_normalize(const FeatureMatrix& m) {
  if (!m.allFinite()) throw InvalidInput("row_l2_normalize: non-finite input");
  FeatureMatrix out = m;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double n = out.row(r).norm();
    if (n > 0.0) out.row(r) /= n;
  }
  return out;
}

FeatureMatrix row_l2_normalize_backward(const FeatureMatrix& raw,
                                        const FeatureMatrix& grad_out) {
  FeatureMatrix g = FeatureMatrix::Zero(raw.rows(), raw.cols());
  for (Eigen::Index r = 0; r < raw.rows(); ++r) {
    const double n = raw.row(r).norm();
    if (n == 0.0) continue;
    const auto y = raw.row(r) / n;
    const double proj = y.dot(grad_out.row(r));
    g.row(r) = (grad_out.row(r) - proj * y) / n;
  }
  return g;
}

namespace {

void check_shapes(const FeatureMatrix& m1, const FeatureMatrix& m2) {
  if (m1.rows() != m2.rows() || m1.cols() != m2.cols()) {
    throw InvalidInput("matrix_distance: shape mismatch");
  }
  if (m1.rows() != kStructuralRows) {
    throw InvalidInput("matrix_distance: expected 9 structural rows");
  }
}

}  // namespace

double matrix_distance(const FeatureMatrix& m1, const FeatureMatrix& m2,
                       const std::optional<RowMask>& mask) {
  check_shapes(m1, m2);
  double acc = 0.0;
  for (int r = 0; r < kStructuralRows; ++r) {
    const double w = mask ? (*mask)[r] : 1.0;
    if (w == 0.0) continue;
    acc += w * (m1.row(r) - m2.row(r)).squaredNorm();
  }
  return std::sqrt(acc);
}

DistanceGrad matrix_distance_grad(const FeatureMatrix& m1, const FeatureMatrix& m2,
                                  const RowMask& mask) {
  check_shapes(m1, m2);
  DistanceGrad out;
  out.d_m1 = FeatureMatrix::Zero(m1.rows(), m1.cols());
  out.d_m2 = FeatureMatrix::Zero(m1.rows(), m1.cols());
  RowMask sq;
  double acc = 0.0;
  for (int r = 0; r < kStructuralRows; ++r) {
    sq[r] = (m1.row(r) - m2.row(r)).squaredNorm();
    acc += mask[r] * sq[r];
  }
  out.value = std::sqrt(acc);
  if (out.value == 0.0) return out;
  const double inv = 1.0 / out.value;
  for (int r = 0; r < kStructuralRows; ++r) {
    out.d_m1.row(r) = (mask[r] * inv) * (m1.row(r) - m2.row(r));
    out.d_mask[r] = 0.5 * inv * sq[r];
  }
  out.d_m2 = -out.d_m1;
  return out;
}

DistanceMatrix pairwise_batch_distances(std::span<const FeatureMatrix> sketches,
                                        std::span<const FeatureMatrix> photos,
                                        std::span<const RowMask> masks) {
  const auto b = sketches.size();
  if (b == 0) throw InvalidInput("pairwise_batch_distances: empty batch");
  if (photos.size() != b || masks.size() != b) {
    throw InvalidInput("pairwise_batch_distances: batch size mismatch");
  }
  DistanceMatrix dist(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      dist(i, j) = matrix_distance(sketches[i], photos[j], masks[i]);
    }
  }
  return dist;
}

}  // namespace sketchabs
