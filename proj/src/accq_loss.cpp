#include "sketchabs/accq_loss.hpp"

#include <algorithm>
#include <cmath>

namespace sketchabs {

void AccqConfig::validate() const {
  if (q < 1) throw InvalidInput("accq: q must be >= 1");
  if (!(tau1 > 0.0) || !(tau2 > 0.0)) throw InvalidInput("accq: temperatures must be positive");
}

int LevelQMap::q_for(AbstractionLevel level) const {
  switch (level) {
    case AbstractionLevel::kCoarse: return coarse;
    case AbstractionLevel::kMid: return mid;
    case AbstractionLevel::kFine: return fine;
  }
  return fine;
}

double smooth_sigmoid(double x, double tau) {
  const double z = std::clamp(x / tau, -kSigmoidClamp, kSigmoidClamp);
  return 1.0 / (1.0 + std::exp(-z));
}

double smooth_sigmoid_grad(double x, double tau) {
  const double z = x / tau;
  if (z >= kSigmoidClamp || z <= -kSigmoidClamp) return 0.0;
  const double s = 1.0 / (1.0 + std::exp(-z));
  return s * (1.0 - s) / tau;
}

double soft_rank(std::span<const double> rel_dist, double tau2) {
  if (rel_dist.empty()) throw InvalidInput("soft_rank: empty relative-distance vector");
  double rank = 0.0;
  for (double r : rel_dist) rank += smooth_sigmoid(r, tau2);
  return rank;
}

AccqResult accq_loss(const DistanceMatrix& dist, std::span<const int> q_per_query,
                     double tau1, double tau2) {
  const auto b = dist.rows();
  if (b == 0) throw InvalidInput("accq_loss: empty batch");
  if (dist.cols() != b) throw InvalidInput("accq_loss: distance matrix must be square");
  if (static_cast<Eigen::Index>(q_per_query.size()) != b) {
    throw InvalidInput("accq_loss: one q per query required");
  }
  for (int q : q_per_query) {
    if (q < 1) throw InvalidInput("accq_loss: q must be >= 1");
  }
  if (!(tau1 > 0.0) || !(tau2 > 0.0)) throw InvalidInput("accq_loss: temperatures must be positive");
  if (!dist.allFinite()) throw InvalidInput("accq_loss: non-finite distances");

  AccqResult out;
  out.grad = Matrix::Zero(b, b);
  std::vector<double> rel(b);
  const double inv_b = 1.0 / static_cast<double>(b);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double target = dist(i, i);
    for (Eigen::Index j = 0; j < b; ++j) rel[j] = target - dist(i, j);
    const double rank = soft_rank(rel, tau2);
    const double margin = static_cast<double>(q_per_query[i]) - rank;
    acc += smooth_sigmoid(margin, tau1);

    // loss_i = -S1(q - rank) / B;  d loss_i / d rank = S1'(q - rank) / B.
    const double d_rank = smooth_sigmoid_grad(margin, tau1) * inv_b;
    if (d_rank == 0.0) continue;
    double d_target = 0.0;
    for (Eigen::Index j = 0; j < b; ++j) {
      const double g = d_rank * smooth_sigmoid_grad(rel[j], tau2);
      d_target += g;
      out.grad(i, j) -= g;
    }
    out.grad(i, i) += d_target;
  }
  out.loss = -acc * inv_b;
  return out;
}

int hard_rank(std::span<const double> distances, std::size_t true_index) {
  if (true_index >= distances.size()) throw InvalidInput("hard_rank: true index out of range");
  const double target = distances[true_index];
  int closer = 0;
  for (double v : distances) {
    if (v < target) ++closer;
  }
  return 1 + closer;
}

double exact_accuracy_at_q(std::span<const RankQuery> queries, int q) {
  if (queries.empty()) throw InvalidInput("exact_accuracy_at_q: no queries");
  std::size_t hits = 0;
  for (const auto& query : queries) {
    if (hard_rank(query.distances, query.true_index) <= q) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

double exact_batch_accuracy_at_q(const DistanceMatrix& dist, std::span<const int> q_per_query) {
  const auto b = dist.rows();
  if (b == 0 || dist.cols() != b || static_cast<Eigen::Index>(q_per_query.size()) != b) {
    throw InvalidInput("exact_batch_accuracy_at_q: bad shapes");
  }
  std::size_t hits = 0;
  std::vector<double> row(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = 0; j < b; ++j) row[j] = dist(i, j);
    if (hard_rank(row, static_cast<std::size_t>(i)) <= q_per_query[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(b);
}

}  // namespace sketchabs
