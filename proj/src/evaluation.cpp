#include "sketchabs/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "sketchabs/parallel.hpp"

namespace sketchabs {

MaskPolicy MaskPolicy::fixed(int rows) {
  if (rows != 3 && rows != 6 && rows != 9) throw InvalidInput("mask policy: forced rows must be 3, 6 or 9");
  return {Kind::kFixed, rows, 0};
}

std::string MaskPolicy::label() const {
  switch (kind) {
    case Kind::kPredicted: return "dynamic";
    case Kind::kFull: return "full";
    case Kind::kFixed: return "fixed" + std::to_string(forced_rows);
    case Kind::kRandom: return "random";
  }
  return "?";
}

Gallery embed_gallery(const ModelParams& params, const Dataset& data) {
  const auto test = data.test();
  Gallery g;
  g.photos.resize(test.size());
  parallel_for(test.size(), [&](std::size_t i) {
    g.photos[i] = forward(params, test[i].photo_obs, Branch::kPhoto).embed;
  });
  return g;
}

namespace {

RowMask prefix_mask(int rows) {
  RowMask m = RowMask::Zero();
  for (int r = 0; r < rows; ++r) m[r] = 1.0;
  return m;
}

QueryResult one_query(const ModelParams& params, const Dataset& data, const Gallery& gallery,
                      std::size_t index, double t, const EvalOptions& options) {
  const auto& obj = data.test()[index];
  const auto sketch = render_partial_sketch(data, obj, t, derive_seed(options.noise_seed, obj.id));
  const auto cache = forward(params, sketch.obs, Branch::kSketch);
  const Vec3 logits = abstraction_head_forward(cache.pooled, params.abs_head);

  QueryResult q;
  q.predicted = argmax_level(logits);
  RowMask mask = full_mask();
  switch (options.mask.kind) {
    case MaskPolicy::Kind::kPredicted:
      mask = level_mask(q.predicted, params.config.embedding.group_sizes);
      break;
    case MaskPolicy::Kind::kFull:
      break;
    case MaskPolicy::Kind::kFixed:
      mask = prefix_mask(options.mask.forced_rows);
      break;
    case MaskPolicy::Kind::kRandom: {
      std::mt19937_64 rng(derive_seed(options.mask.seed, obj.id, static_cast<std::uint64_t>(t * 1000.0 + 0.5)));
      std::uniform_int_distribution<int> pick(1, 3);
      mask = prefix_mask(3 * pick(rng));
      break;
    }
  }
  q.rows = active_rows(mask);
  q.ranking.true_index = index;
  q.ranking.distances.resize(gallery.photos.size());
  for (std::size_t j = 0; j < gallery.photos.size(); ++j) {
    q.ranking.distances[j] = matrix_distance(cache.embed, gallery.photos[j], mask);
  }
  return q;
}

std::vector<RankQuery> rankings(const std::vector<QueryResult>& results) {
  std::vector<RankQuery> out;
  out.reserve(results.size());
  for (const auto& r : results) out.push_back(r.ranking);
  return out;
}

}  // namespace

std::vector<QueryResult> run_queries(const ModelParams& params, const Dataset& data,
                                     const Gallery& gallery, double t, const EvalOptions& options) {
  const auto n = data.test().size();
  if (gallery.photos.size() != n) throw InvalidInput("run_queries: gallery does not match test set");
  std::vector<QueryResult> out(n);
  parallel_for(n, [&](std::size_t i) { out[i] = one_query(params, data, gallery, i, t, options); });
  return out;
}

void check_compatible(const Checkpoint& ckpt, const DatasetManifest& manifest, const Dataset& data) {
  if (!ckpt.data_digest.empty() && ckpt.data_digest != manifest.content_digest) {
    throw FormatError("checkpoint was trained on dataset " + ckpt.data_digest + " but the data directory holds " +
                      manifest.content_digest);
  }
  if (ckpt.params.d_obs != data.config.d_obs) {
    throw FormatError("checkpoint input width " + std::to_string(ckpt.params.d_obs) +
                      " does not match dataset d_obs " + std::to_string(data.config.d_obs));
  }
}

std::vector<double> completion_grid(int steps) {
  if (steps < 1) throw InvalidInput("completion grid needs at least one step");
  std::vector<double> grid(steps);
  for (int k = 1; k <= steps; ++k) grid[k - 1] = static_cast<double>(k) / steps;
  return grid;
}

std::map<int, double> evaluate_retrieval(const ModelParams& params, const Dataset& data,
                                         std::span<const int> q_list, const EvalOptions& options,
                                         std::array<int, kLevels>* histogram) {
  const Gallery gallery = embed_gallery(params, data);
  const auto results = run_queries(params, data, gallery, 1.0, options);
  const auto queries = rankings(results);
  std::map<int, double> acc;
  for (int q : q_list) acc[q] = exact_accuracy_at_q(queries, q);
  if (histogram) {
    histogram->fill(0);
    for (const auto& r : results) ++(*histogram)[static_cast<int>(r.predicted)];
  }
  return acc;
}

double separation_entropy(std::span<const double> distances, std::size_t true_index) {
  if (distances.empty()) throw InvalidInput("separation_entropy: empty gallery");
  if (true_index >= distances.size()) throw InvalidInput("separation_entropy: true index out of range");
  // log p = -d* - logsumexp(-d)
  double mx = -std::numeric_limits<double>::infinity();
  for (double d : distances) mx = std::max(mx, -d);
  double sum = 0.0;
  for (double d : distances) sum += std::exp(-d - mx);
  const double log_p = -distances[true_index] - (mx + std::log(sum));
  const double p = std::exp(log_p);
  return p > 0.0 ? -p * log_p : 0.0;
}

std::vector<CurvePoint> entropy_study(const ModelParams& params, const Dataset& data,
                                      std::span<const double> t_grid, const EvalOptions& options) {
  if (data.test().empty()) throw InvalidInput("entropy_study: empty gallery");
  if (!std::is_sorted(t_grid.begin(), t_grid.end())) throw InvalidInput("entropy_study: t grid must ascend");
  const Gallery gallery = embed_gallery(params, data);
  std::vector<CurvePoint> curve;
  for (double t : t_grid) {
    const auto results = run_queries(params, data, gallery, t, options);
    double acc = 0.0;
    for (const auto& r : results) acc += separation_entropy(r.ranking.distances, r.ranking.true_index);
    curve.push_back({t, acc / static_cast<double>(results.size())});
  }
  return curve;
}

double rank_percentile(int rank, int gallery_size) {
  if (gallery_size < 2) throw InvalidInput("rank percentile needs a gallery of at least 2");
  return 100.0 * static_cast<double>(gallery_size - rank) / static_cast<double>(gallery_size - 1);
}

double mean_rank_percentile(std::span<const RankQuery> queries) {
  if (queries.empty()) throw InvalidInput("m@A: no queries");
  double acc = 0.0;
  for (const auto& q : queries) {
    acc += rank_percentile(hard_rank(q.distances, q.true_index), static_cast<int>(q.distances.size()));
  }
  return acc / static_cast<double>(queries.size());
}

double mean_reciprocal_rank(std::span<const RankQuery> queries) {
  if (queries.empty()) throw InvalidInput("m@B: no queries");
  double acc = 0.0;
  for (const auto& q : queries) acc += reciprocal_rank(hard_rank(q.distances, q.true_index));
  return acc / static_cast<double>(queries.size());
}

EarlyRetrieval early_retrieval_curves(const ModelParams& params, const Dataset& data,
                                      std::span<const double> t_grid, const EvalOptions& options) {
  if (data.test().size() < 2) throw InvalidInput("early retrieval: m@A needs a gallery of at least 2");
  if (!std::is_sorted(t_grid.begin(), t_grid.end())) throw InvalidInput("early retrieval: t grid must ascend");
  const Gallery gallery = embed_gallery(params, data);
  EarlyRetrieval out;
  for (double t : t_grid) {
    const auto queries = rankings(run_queries(params, data, gallery, t, options));
    out.ma.push_back({t, mean_rank_percentile(queries)});
    out.mb.push_back({t, mean_reciprocal_rank(queries)});
  }
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    out.ma_auc += out.ma[k].value;
    out.mb_auc += out.mb[k].value;
  }
  if (!t_grid.empty()) {
    out.ma_auc /= static_cast<double>(t_grid.size());
    out.mb_auc /= static_cast<double>(t_grid.size());
  }
  return out;
}

std::vector<AblationCell> fixed_mask_ablation(const ModelParams& params, const Dataset& data,
                                              std::span<const MaskPolicy> settings,
                                              std::span<const int> q_list, const EvalOptions& options) {
  const Gallery gallery = embed_gallery(params, data);
  constexpr AbstractionLevel kGrid[] = {AbstractionLevel::kCoarse, AbstractionLevel::kMid, AbstractionLevel::kFine};
  std::vector<AblationCell> cells;
  for (const auto& policy : settings) {
    EvalOptions opt = options;
    opt.mask = policy;
    std::vector<RankQuery> mixed;
    for (auto level : kGrid) {
      const auto queries = rankings(run_queries(params, data, gallery, completion_of(level), opt));
      AblationCell cell{policy.label(), level_name(level), {}};
      for (int q : q_list) cell.acc_at[q] = exact_accuracy_at_q(queries, q);
      cells.push_back(std::move(cell));
      mixed.insert(mixed.end(), queries.begin(), queries.end());
    }
    AblationCell cell{policy.label(), "mixed", {}};
    for (int q : q_list) cell.acc_at[q] = exact_accuracy_at_q(mixed, q);
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::string curve_csv(std::span<const CurvePoint> curve) {
  std::ostringstream out;
  out.precision(10);
  out << "t,value\n";
  for (const auto& p : curve) out << p.t << ',' << p.value << '\n';
  return out.str();
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  if (!acc_at.empty()) {
    out << "[accuracy]\n";
    for (const auto& [q, v] : acc_at) out << "acc@" << q << " = " << v << '\n';
    out << "\n[mask_histogram]\n"
        << "coarse = " << mask_histogram[0] << "\nmid = " << mask_histogram[1]
        << "\nfine = " << mask_histogram[2] << "\n\n";
  }
  if (!entropy_curve.empty()) {
    out << "[entropy]\n";
    for (const auto& p : entropy_curve) out << "t=" << p.t << " H=" << p.value << '\n';
    out << '\n';
  }
  if (!ma_curve.empty()) {
    out << "[early_retrieval]\n";
    for (std::size_t k = 0; k < ma_curve.size(); ++k) {
      out << "t=" << ma_curve[k].t << " m@A=" << ma_curve[k].value << " m@B=" << mb_curve[k].value << '\n';
    }
    out << "mean m@A = " << ma_auc << "\nmean m@B = " << mb_auc << "\n\n";
  }
  return out.str();
}

std::string ablation_text(std::span<const AblationCell> cells) {
  std::ostringstream out;
  out.precision(4);
  out << std::fixed << "[ablation]\n";
  for (const auto& c : cells) {
    out << c.setting << ' ' << c.level;
    for (const auto& [q, v] : c.acc_at) out << " acc@" << q << '=' << v;
    out << '\n';
  }
  return out.str();
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("spearman: need two equal-length series");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace sketchabs
