#include "sketchabs/abstraction_mask.hpp"

#include <cmath>
#include <limits>

namespace sketchabs {

double completion_of(AbstractionLevel level) {
  switch (level) {
    case AbstractionLevel::kCoarse: return 0.30;
    case AbstractionLevel::kMid: return 0.60;
    case AbstractionLevel::kFine: return 1.00;
  }
  return 1.0;
}

const char* level_name(AbstractionLevel level) {
  switch (level) {
    case AbstractionLevel::kCoarse: return "coarse";
    case AbstractionLevel::kMid: return "mid";
    case AbstractionLevel::kFine: return "fine";
  }
  return "?";
}

Vec3 one_hot(AbstractionLevel level) {
  Vec3 v = Vec3::Zero();
  v[static_cast<int>(level)] = 1.0;
  return v;
}

AbstractionLevel argmax_level(const Vec3& v) {
  int best = 0;
  for (int i = 1; i < kLevels; ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<AbstractionLevel>(best);
}

Vec3 softmax(const Vec3& logits) {
  const double mx = logits.maxCoeff();
  Vec3 e = (logits.array() - mx).exp();
  return e / e.sum();
}

AbstractionHead AbstractionHead::zeros(int in_dim) {
  AbstractionHead h;
  h.weight.setZero(kLevels, in_dim);
  h.bias.setZero();
  return h;
}

Vec3 abstraction_head_forward(const Vector& pooled, const AbstractionHead& head) {
  if (pooled.size() != head.weight.cols()) {
    throw InvalidInput("abstraction_head_forward: pooled dimension mismatch");
  }
  if (!pooled.allFinite()) throw InvalidInput("abstraction_head_forward: non-finite input");
  return head.weight * pooled + head.bias;
}

Vec3 sample_gumbel_noise(std::mt19937_64& rng) {
  // Open interval keeps both logs finite.
  std::uniform_real_distribution<double> unif(std::numeric_limits<double>::min(), 1.0);
  Vec3 g;
  for (int i = 0; i < kLevels; ++i) g[i] = -std::log(-std::log(unif(rng)));
  return g;
}

GumbelSample gumbel_argmax_with_noise(const Vec3& logits, const Vec3& noise,
                                      double temperature, bool hard) {
  if (!(temperature > 0.0)) throw InvalidInput("gumbel_argmax: temperature must be positive");
  GumbelSample s;
  s.noise = noise;
  s.temperature = temperature;
  s.hard = hard;
  s.soft = softmax((logits + noise) / temperature);
  s.value = hard ? one_hot(argmax_level(s.soft)) : s.soft;
  return s;
}

GumbelSample gumbel_argmax(const Vec3& logits, double temperature, bool hard,
                           std::mt19937_64& rng) {
  if (!(temperature > 0.0)) throw InvalidInput("gumbel_argmax: temperature must be positive");
  return gumbel_argmax_with_noise(logits, sample_gumbel_noise(rng), temperature, hard);
}

Vec3 gumbel_backward(const GumbelSample& sample, const Vec3& grad_value) {
  const Vec3& s = sample.soft;
  const double inner = s.dot(grad_value);
  return (s.array() * (grad_value.array() - inner)).matrix() / sample.temperature;
}

Vec3 build_selection_mask(const Vec3& a_hat) {
  return Vec3(a_hat[0] + a_hat[1] + a_hat[2], a_hat[1] + a_hat[2], a_hat[2]);
}

Vec3 build_selection_mask_backward(const Vec3& g) {
  return Vec3(g[0], g[0] + g[1], g[0] + g[1] + g[2]);
}

namespace {

void check_groups(const GroupSizes& group_sizes) {
  int total = 0;
  for (int g : group_sizes) {
    if (g < 0) throw InvalidInput("expand_mask: negative group size");
    total += g;
  }
  if (total != kStructuralRows) throw InvalidInput("expand_mask: group sizes must sum to 9");
}

}  // namespace

RowMask expand_mask(const Vec3& mask3, const GroupSizes& group_sizes) {
  check_groups(group_sizes);
  RowMask out;
  int r = 0;
  for (int g = 0; g < kLevels; ++g) {
    for (int k = 0; k < group_sizes[g]; ++k) out[r++] = mask3[g];
  }
  return out;
}

Vec3 expand_mask_backward(const RowMask& grad_mask9, const GroupSizes& group_sizes) {
  check_groups(group_sizes);
  Vec3 out = Vec3::Zero();
  int r = 0;
  for (int g = 0; g < kLevels; ++g) {
    for (int k = 0; k < group_sizes[g]; ++k) out[g] += grad_mask9[r++];
  }
  return out;
}

FeatureMatrix apply_mask(const FeatureMatrix& m, const RowMask& mask9) {
  if (m.rows() != kStructuralRows) throw InvalidInput("apply_mask: expected 9 rows");
  FeatureMatrix out = m;
  for (int r = 0; r < kStructuralRows; ++r) out.row(r) *= mask9[r];
  return out;
}

RowMask level_mask(AbstractionLevel level, const GroupSizes& group_sizes) {
  return expand_mask(build_selection_mask(one_hot(level)), group_sizes);
}

int active_rows(const RowMask& mask9) {
  int n = 0;
  while (n < kStructuralRows && mask9[n] > 0.5) ++n;
  return n;
}

}  // namespace sketchabs
