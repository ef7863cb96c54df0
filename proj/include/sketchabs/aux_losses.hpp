#pragma once

#include <cstdint>
#include <random>

#include "sketchabs/abstraction_mask.hpp"
#include "sketchabs/core.hpp"

namespace sketchabs {

struct LossWeights {
  double recons = 0.5;
  double accq = 1.0;
  double abs = 0.5;

  void validate() const;
};

struct TripletConfig {
  double margin = 0.3;

  void validate() const;
};

struct TripletResult {
  double loss = 0.0;
  FeatureMatrix d_anchor;
  FeatureMatrix d_positive;
  FeatureMatrix d_negative;
};

/// max(0, mu + delta(s, p) - delta(s, n)) on masked matrix distances.
/// Gradients are zero when the hinge is inactive.
TripletResult triplet_loss(const FeatureMatrix& anchor, const FeatureMatrix& positive,
                           const FeatureMatrix& negative, double margin,
                           const RowMask& mask = full_mask());

/// Hinge on precomputed distances, used by the batch trainer.
inline double triplet_hinge(double d_pos, double d_neg, double margin) {
  const double v = margin + d_pos - d_neg;
  return v > 0.0 ? v : 0.0;
}

inline constexpr double kProbFloor = 1e-12;

struct AbstractionCeResult {
  double loss = 0.0;
  Vec3 d_probs = Vec3::Zero();
  Vec3 d_logits = Vec3::Zero();
};

/// -(1/3) sum_i a_gt[i] log(a_hat[i]) with a_hat clamped below at 1e-12.
/// d_probs is w.r.t. a_hat; d_logits assumes a_hat = softmax(logits).
AbstractionCeResult abstraction_ce_loss(const Vec3& a_hat, const Vec3& a_gt);

/// Frozen map from a 14 x d latent to an output vector.
class GeneratorOracle {
 public:
  virtual ~GeneratorOracle() = default;
  virtual int output_dim() const = 0;
  virtual int latent_rows() const { return kLatentRows; }
  virtual int latent_cols() const = 0;
  virtual Vector generate(const Matrix& latent) const = 0;
  /// d<grad_out, G(latent)> / d latent.
  virtual Matrix pullback(const Matrix& latent, const Vector& grad_out) const = 0;
};

/// G(z) = A * vec(z), vec row-major, A ~ N(0, 1/(14 d)) from a fixed seed.
class LinearGenerator final : public GeneratorOracle {
 public:
  LinearGenerator(int d, int output_dim, std::uint64_t seed);
  explicit LinearGenerator(Matrix a, int d);

  int output_dim() const override { return static_cast<int>(a_.rows()); }
  int latent_cols() const override { return d_; }
  Vector generate(const Matrix& latent) const override;
  Matrix pullback(const Matrix& latent, const Vector& grad_out) const override;

  const Matrix& matrix() const { return a_; }

 private:
  Matrix a_;
  int d_;
};

/// Copies the first n rows of `masked` and fills rows n..13 with i.i.d.
/// standard normal draws. n must be 3, 6 or 9.
Matrix pad_latent(const FeatureMatrix& masked, int n, std::mt19937_64& rng);

struct ReconstructionResult {
  double loss = 0.0;
  Matrix d_latent_sketch;  // nonzero only in the first n rows
  Matrix d_latent_photo;
};

/// ||p - G(latent_s)|| + ||p - G(latent_p)||. Gradients are restricted to
/// the first `n_rows` rows; padded rows are treated as constants.
ReconstructionResult reconstruction_loss(const Matrix& latent_sketch, const Matrix& latent_photo,
                                         const Vector& photo_target, const GeneratorOracle& gen,
                                         int n_rows);

struct LossComponents {
  double recons = 0.0;
  double accq = 0.0;
  double abs = 0.0;
};

double total_loss(const LossComponents& c, const LossWeights& w);

}  // namespace sketchabs
