#pragma once

#include <span>
#include <vector>

#include "sketchabs/abstraction_mask.hpp"
#include "sketchabs/core.hpp"

namespace sketchabs {

struct AccqConfig {
  int q = 1;
  double tau1 = 1.0;
  double tau2 = 0.01;

  void validate() const;
};

/// Rank threshold per abstraction level: coarse sketches only need the true
/// photo somewhere in the top 10, fine sketches need it first.
struct LevelQMap {
  int coarse = 10;
  int mid = 5;
  int fine = 1;

  int q_for(AbstractionLevel level) const;
};

/// Exponent clamp: |x / tau| beyond this saturates with zero derivative.
inline constexpr double kSigmoidClamp = 60.0;

/// 1 / (1 + exp(-x / tau)).
double smooth_sigmoid(double x, double tau);

/// d/dx smooth_sigmoid(x, tau); exactly zero once the exponent is clamped.
double smooth_sigmoid_grad(double x, double tau);

/// Sum of smooth_sigmoid(rel_dist[j], tau2). The self entry (0) adds 0.5.
double soft_rank(std::span<const double> rel_dist, double tau2);

struct AccqResult {
  double loss = 0.0;
  Matrix grad;  // d loss / d dist(i, j)
};

/// -(1/B) sum_i S_tau1(q_i - soft_rank_i), with
/// rel_i[j] = dist(i, i) - dist(i, j). Queries are accumulated in index order.
AccqResult accq_loss(const DistanceMatrix& dist, std::span<const int> q_per_query,
                     double tau1, double tau2);

/// 1 + number of gallery items strictly closer than the true item.
int hard_rank(std::span<const double> distances, std::size_t true_index);

struct RankQuery {
  std::vector<double> distances;
  std::size_t true_index = 0;
};

/// Fraction of queries whose hard rank is at most q.
double exact_accuracy_at_q(std::span<const RankQuery> queries, int q);

/// Batch version over a B x B distance matrix with true pairs on the diagonal.
double exact_batch_accuracy_at_q(const DistanceMatrix& dist, std::span<const int> q_per_query);

}  // namespace sketchabs
