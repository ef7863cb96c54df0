#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sketchabs/accq_loss.hpp"
#include "sketchabs/checkpoint.hpp"
#include "sketchabs/model.hpp"
#include "sketchabs/synth_data.hpp"

namespace sketchabs {

/// How the row mask of a query is chosen at evaluation time.
struct MaskPolicy {
  enum class Kind { kPredicted, kFixed, kRandom, kFull };
  Kind kind = Kind::kPredicted;
  int forced_rows = 9;  // kFixed only: 3, 6 or 9
  std::uint64_t seed = 0;

  static MaskPolicy predicted() { return {}; }
  static MaskPolicy full() { return {Kind::kFull, 9, 0}; }
  static MaskPolicy fixed(int rows);
  static MaskPolicy random(std::uint64_t seed) { return {Kind::kRandom, 9, seed}; }
  std::string label() const;
};

struct EvalOptions {
  /// Base seed for sketch rendering noise; each object gets its own stream,
  /// shared across completion levels.
  std::uint64_t noise_seed = 2024;
  MaskPolicy mask = MaskPolicy::predicted();
};

/// Test photos embedded once, in test-set order.
struct Gallery {
  std::vector<FeatureMatrix> photos;
};

Gallery embed_gallery(const ModelParams& params, const Dataset& data);

struct QueryResult {
  RankQuery ranking;
  AbstractionLevel predicted = AbstractionLevel::kFine;
  int rows = kStructuralRows;
};

/// Renders every test object's sketch at completion t and measures its
/// distance to each gallery photo under the mask policy. Queries are
/// returned in test-set order; true_index is the object's gallery slot.
std::vector<QueryResult> run_queries(const ModelParams& params, const Dataset& data,
                                     const Gallery& gallery, double t, const EvalOptions& options);

/// Throws FormatError when the checkpoint was trained on a different
/// dataset or its input width does not match.
void check_compatible(const Checkpoint& ckpt, const DatasetManifest& manifest, const Dataset& data);

struct CurvePoint {
  double t = 0.0;
  double value = 0.0;
};

struct EvalReport {
  std::map<int, double> acc_at;
  std::vector<CurvePoint> entropy_curve;
  std::vector<CurvePoint> ma_curve;
  std::vector<CurvePoint> mb_curve;
  double ma_auc = 0.0;
  double mb_auc = 0.0;
  std::array<int, kLevels> mask_histogram{};

  /// One "[section]" block per populated metric.
  std::string to_text() const;
};

/// t, value rows with a header line.
std::string curve_csv(std::span<const CurvePoint> curve);

/// k / steps for k = 1..steps.
std::vector<double> completion_grid(int steps);

/// Acc@q for each q on sketches rendered at t = 1.
std::map<int, double> evaluate_retrieval(const ModelParams& params, const Dataset& data,
                                         std::span<const int> q_list, const EvalOptions& options = {},
                                         std::array<int, kLevels>* histogram = nullptr);

/// -p ln p with p = softmax(-distances)[true_index].
double separation_entropy(std::span<const double> distances, std::size_t true_index);

std::vector<CurvePoint> entropy_study(const ModelParams& params, const Dataset& data,
                                      std::span<const double> t_grid, const EvalOptions& options = {});

/// 100 (N - rank) / (N - 1).
double rank_percentile(int rank, int gallery_size);
inline double reciprocal_rank(int rank) { return 1.0 / static_cast<double>(rank); }

struct EarlyRetrieval {
  std::vector<CurvePoint> ma;
  std::vector<CurvePoint> mb;
  double ma_auc = 0.0;  // mean over the grid
  double mb_auc = 0.0;
};

/// m@A / m@B summaries of one set of queries.
double mean_rank_percentile(std::span<const RankQuery> queries);
double mean_reciprocal_rank(std::span<const RankQuery> queries);

EarlyRetrieval early_retrieval_curves(const ModelParams& params, const Dataset& data,
                                      std::span<const double> t_grid, const EvalOptions& options = {});

struct AblationCell {
  std::string setting;
  std::string level;  // "coarse", "mid", "fine" or "mixed"
  std::map<int, double> acc_at;
};

/// Acc per (mask setting, completion level) on test sketches rendered at
/// 0.3 / 0.6 / 1.0, plus a "mixed" row pooling all three.
std::vector<AblationCell> fixed_mask_ablation(const ModelParams& params, const Dataset& data,
                                              std::span<const MaskPolicy> settings,
                                              std::span<const int> q_list, const EvalOptions& options = {});

std::string ablation_text(std::span<const AblationCell> cells);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace sketchabs
