#include "sketchabs/aux_losses.hpp"

#include <cmath>

namespace sketchabs {

void LossWeights::validate() const {
  if (recons < 0.0 || accq < 0.0 || abs < 0.0) {
    throw InvalidInput("loss weights must be non-negative");
  }
}

void TripletConfig::validate() const {
  if (!(margin > 0.0)) throw InvalidInput("triplet margin must be positive");
}

TripletResult triplet_loss(const FeatureMatrix& anchor, const FeatureMatrix& positive,
                           const FeatureMatrix& negative, double margin, const RowMask& mask) {
  if (anchor.rows() != positive.rows() || anchor.rows() != negative.rows() ||
      anchor.cols() != positive.cols() || anchor.cols() != negative.cols()) {
    throw InvalidInput("triplet_loss: shape mismatch");
  }
  const auto pos = matrix_distance_grad(anchor, positive, mask);
  const auto neg = matrix_distance_grad(anchor, negative, mask);
  TripletResult out;
  out.loss = triplet_hinge(pos.value, neg.value, margin);
  if (out.loss > 0.0) {
    out.d_anchor = pos.d_m1 - neg.d_m1;
    out.d_positive = pos.d_m2;
    out.d_negative = -neg.d_m2;
  } else {
    out.d_anchor = FeatureMatrix::Zero(anchor.rows(), anchor.cols());
    out.d_positive = out.d_anchor;
    out.d_negative = out.d_anchor;
  }
  return out;
}

AbstractionCeResult abstraction_ce_loss(const Vec3& a_hat, const Vec3& a_gt) {
  AbstractionCeResult out;
  for (int i = 0; i < kLevels; ++i) {
    if (a_gt[i] == 0.0) continue;
    const double p = a_hat[i];
    if (p > kProbFloor) {
      out.loss -= a_gt[i] * std::log(p) / 3.0;
      out.d_probs[i] = -a_gt[i] / (3.0 * p);
    } else {
      out.loss -= a_gt[i] * std::log(kProbFloor) / 3.0;
    }
  }
  // Chain through softmax: d/dz_k = sum_i g_i p_i (delta_ik - p_k).
  const double inner = a_hat.dot(out.d_probs);
  out.d_logits = (a_hat.array() * (out.d_probs.array() - inner)).matrix();
  return out;
}

LinearGenerator::LinearGenerator(int d, int output_dim, std::uint64_t seed) : d_(d) {
  if (d <= 0 || output_dim <= 0) throw InvalidInput("LinearGenerator: dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(kLatentRows * d)));
  a_.resize(output_dim, kLatentRows * d);
  for (Eigen::Index r = 0; r < a_.rows(); ++r) {
    for (Eigen::Index c = 0; c < a_.cols(); ++c) a_(r, c) = normal(rng);
  }
}

LinearGenerator::LinearGenerator(Matrix a, int d) : a_(std::move(a)), d_(d) {
  if (a_.cols() != kLatentRows * d) throw InvalidInput("LinearGenerator: matrix width must be 14*d");
}

Vector LinearGenerator::generate(const Matrix& latent) const {
  if (latent.rows() != kLatentRows || latent.cols() != d_) {
    throw InvalidInput("LinearGenerator: latent must be 14 x d");
  }
  const Eigen::Map<const Vector> flat(latent.data(), latent.size());
  return a_ * flat;
}

Matrix LinearGenerator::pullback(const Matrix& latent, const Vector& grad_out) const {
  if (latent.rows() != kLatentRows || latent.cols() != d_) {
    throw InvalidInput("LinearGenerator: latent must be 14 x d");
  }
  if (grad_out.size() != a_.rows()) throw InvalidInput("LinearGenerator: output gradient size");
  Vector flat = a_.transpose() * grad_out;
  return Eigen::Map<const Matrix>(flat.data(), kLatentRows, d_);
}

Matrix pad_latent(const FeatureMatrix& masked, int n, std::mt19937_64& rng) {
  if (n != 3 && n != 6 && n != 9) throw InvalidInput("pad_latent: n must be 3, 6 or 9");
  if (masked.rows() < n) throw InvalidInput("pad_latent: too few rows");
  Matrix out(kLatentRows, masked.cols());
  out.topRows(n) = masked.topRows(n);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int r = n; r < kLatentRows; ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = normal(rng);
  }
  return out;
}

namespace {

double residual_term(const Matrix& latent, const Vector& target, const GeneratorOracle& gen,
                     int n_rows, Matrix& grad) {
  const Vector residual = target - gen.generate(latent);
  const double norm = residual.norm();
  grad = Matrix::Zero(latent.rows(), latent.cols());
  if (norm > 0.0) {
    // d||p - G(z)|| / dz = -J^T (p - G(z)) / ||p - G(z)||
    grad = gen.pullback(latent, -residual / norm);
    grad.bottomRows(latent.rows() - n_rows).setZero();
  }
  return norm;
}

}  // namespace

ReconstructionResult reconstruction_loss(const Matrix& latent_sketch, const Matrix& latent_photo,
                                         const Vector& photo_target, const GeneratorOracle& gen,
                                         int n_rows) {
  if (photo_target.size() != gen.output_dim()) {
    throw InvalidInput("reconstruction_loss: generator output and photo target differ in size");
  }
  if (n_rows < 0 || n_rows > latent_sketch.rows()) {
    throw InvalidInput("reconstruction_loss: bad row count");
  }
  ReconstructionResult out;
  out.loss = residual_term(latent_sketch, photo_target, gen, n_rows, out.d_latent_sketch) +
             residual_term(latent_photo, photo_target, gen, n_rows, out.d_latent_photo);
  return out;
}

double total_loss(const LossComponents& c, const LossWeights& w) {
  return w.recons * c.recons + w.accq * c.accq + w.abs * c.abs;
}

}  // namespace sketchabs
