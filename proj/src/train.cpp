#include "sketchabs/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sketchabs {

void TrainConfig::validate() const {
  model.validate();
  if (batch_size < 2) throw InvalidInput("train: batch_size must be >= 2 for ranking losses");
  if (epochs < 0) throw InvalidInput("train: epochs must be >= 0");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidInput("train: lr must be non-negative");
  weights.validate();
  accq.validate();
  triplet.validate();
  if (level_q.coarse < 1 || level_q.mid < 1 || level_q.fine < 1) {
    throw InvalidInput("train: per-level q values must be >= 1");
  }
  if (!(gumbel_temperature > 0.0)) throw InvalidInput("train: gumbel temperature must be positive");
  if (d_img <= 0) throw InvalidInput("train: d_img must be positive");
  int cum = 0;
  for (int g : model.embedding.group_sizes) {
    cum += g;
    if (cum != 3 && cum != 6 && cum != 9) {
      throw InvalidInput("train: every prefix of group_sizes must cover 3, 6 or 9 rows");
    }
  }
}

StepNoise sample_step_noise(std::size_t batch_size, std::mt19937_64& rng) {
  StepNoise n;
  n.gumbel.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) n.gumbel.push_back(sample_gumbel_noise(rng));
  n.padding_seed = rng();
  return n;
}

namespace {

int prefix_rows(AbstractionLevel level, const GroupSizes& groups) {
  int n = 0;
  for (int g = 0; g <= static_cast<int>(level); ++g) n += groups[g];
  return n;
}

}  // namespace

StepMetrics evaluate_objective(const ModelParams& params, std::span<const TrainSample> batch,
                               const TrainConfig& config, const GeneratorOracle& gen,
                               const StepNoise& noise, ModelParams* grads) {
  const std::size_t b = batch.size();
  if (b == 0) throw InvalidInput("evaluate_objective: empty batch");
  if (config.use_mask && noise.gumbel.size() < b) throw InvalidInput("evaluate_objective: missing Gumbel noise");
  const auto& groups = params.config.embedding.group_sizes;
  const auto& w = config.weights;
  const double inv_b = 1.0 / static_cast<double>(b);

  std::vector<BranchCache> sketch(b), photo(b);
  std::vector<Vec3> logits(b);
  std::vector<GumbelSample> samples(b);
  std::vector<RowMask> masks(b, full_mask());
  std::vector<int> rows(b, kStructuralRows);
  StepMetrics metrics;

  for (std::size_t i = 0; i < b; ++i) {
    sketch[i] = forward(params, batch[i].sketch_obs, Branch::kSketch);
    photo[i] = forward(params, batch[i].photo_obs, Branch::kPhoto);
    logits[i] = abstraction_head_forward(sketch[i].pooled, params.abs_head);
    AbstractionLevel predicted = AbstractionLevel::kFine;
    if (config.use_mask) {
      samples[i] = gumbel_argmax_with_noise(logits[i], noise.gumbel[i], config.gumbel_temperature,
                                            config.gumbel_hard);
      masks[i] = expand_mask(build_selection_mask(samples[i].value), groups);
      predicted = argmax_level(samples[i].soft);
    }
    rows[i] = prefix_rows(predicted, groups);
    ++metrics.level_histogram[static_cast<int>(predicted)];
  }

  std::vector<FeatureMatrix> ms(b), mp(b);
  for (std::size_t i = 0; i < b; ++i) {
    ms[i] = sketch[i].embed;
    mp[i] = photo[i].embed;
  }
  const DistanceMatrix dist = pairwise_batch_distances(ms, mp, masks);
  {
    const std::vector<int> ones(b, 1);
    metrics.batch_acc1 = exact_batch_accuracy_at_q(dist, ones);
  }

  // Ranking term and d/d dist.
  Matrix d_dist = Matrix::Zero(b, b);
  if (config.ranking == RankingLoss::kAccq) {
    std::vector<int> q(b);
    for (std::size_t i = 0; i < b; ++i) {
      q[i] = config.per_level_q ? config.level_q.q_for(batch[i].level) : config.accq.q;
    }
    const auto r = accq_loss(dist, q, config.accq.tau1, config.accq.tau2);
    metrics.components.accq = r.loss;
    d_dist = r.grad;
  } else {
    const double inv_pairs = 1.0 / static_cast<double>(b * (b - 1));
    double acc = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < b; ++j) {
        if (j == i) continue;
        const double h = triplet_hinge(dist(i, i), dist(i, j), config.triplet.margin);
        acc += h;
        if (h > 0.0) {
          d_dist(i, i) += inv_pairs;
          d_dist(i, j) -= inv_pairs;
        }
      }
    }
    metrics.components.accq = acc * inv_pairs;
  }

  std::vector<FeatureMatrix> d_ms(b), d_mp(b);
  std::vector<Vec3> d_logits(b, Vec3::Zero());
  if (grads) {
    for (std::size_t i = 0; i < b; ++i) {
      d_ms[i] = FeatureMatrix::Zero(kStructuralRows, params.d());
      d_mp[i] = FeatureMatrix::Zero(kStructuralRows, params.d());
    }
    for (std::size_t i = 0; i < b; ++i) {
      RowMask d_mask = RowMask::Zero();
      for (std::size_t j = 0; j < b; ++j) {
        const double g = w.accq * d_dist(i, j);
        if (g == 0.0) continue;
        const auto dg = matrix_distance_grad(ms[i], mp[j], masks[i]);
        d_ms[i] += g * dg.d_m1;
        d_mp[j] += g * dg.d_m2;
        d_mask += g * dg.d_mask;
      }
      if (config.use_mask) {
        const Vec3 d_value = build_selection_mask_backward(expand_mask_backward(d_mask, groups));
        d_logits[i] += gumbel_backward(samples[i], d_value);
      }
    }
  }

  // Abstraction identification.
  for (std::size_t i = 0; i < b; ++i) {
    const auto ce = abstraction_ce_loss(softmax(logits[i]), one_hot(batch[i].level));
    metrics.components.abs += ce.loss * inv_b;
    if (grads) d_logits[i] += (w.abs * inv_b) * ce.d_logits;
  }

  // Reconstruction against the frozen generator; padded rows and the mask
  // itself receive no gradient.
  {
    for (std::size_t i = 0; i < b; ++i) {
      std::mt19937_64 rng_s(derive_seed(noise.padding_seed, i, 0));
      std::mt19937_64 rng_p(derive_seed(noise.padding_seed, i, 1));
      const Matrix latent_s = pad_latent(ms[i], rows[i], rng_s);
      const Matrix latent_p = pad_latent(mp[i], rows[i], rng_p);
      const auto rec = reconstruction_loss(latent_s, latent_p, batch[i].photo_obs, gen, rows[i]);
      metrics.components.recons += rec.loss * inv_b;
      if (grads) {
        d_ms[i] += (w.recons * inv_b) * rec.d_latent_sketch.topRows(kStructuralRows);
        d_mp[i] += (w.recons * inv_b) * rec.d_latent_photo.topRows(kStructuralRows);
      }
    }
  }

  metrics.total = total_loss(metrics.components, w);

  if (grads) {
    for (std::size_t i = 0; i < b; ++i) {
      const Vector d_pooled = params.abs_head.weight.transpose() * d_logits[i];
      grads->abs_head.weight.noalias() += d_logits[i] * sketch[i].pooled.transpose();
      grads->abs_head.bias += d_logits[i];
      backward(params, sketch[i], Branch::kSketch, d_ms[i], d_pooled, *grads);
      backward(params, photo[i], Branch::kPhoto, d_mp[i], Vector(), *grads);
    }
  }
  return metrics;
}

StepMetrics train_step(std::span<const TrainSample> batch, ModelParams& params, Optimizer& optimizer,
                       const TrainConfig& config, const GeneratorOracle& gen, std::mt19937_64& rng) {
  StepNoise noise = sample_step_noise(batch.size(), rng);
  if (config.freeze_padding) noise.padding_seed = derive_seed(config.seed, 0x9adULL);
  ModelParams grads = params.zeros_like();
  const auto metrics = evaluate_objective(params, batch, config, gen, noise, &grads);
  if (!std::isfinite(metrics.total)) {
    throw ComputationError("train_step: non-finite loss (total=" + std::to_string(metrics.total) + ")");
  }
  for (const auto& t : grads.tensors()) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      if (!std::isfinite(t.data[i])) {
        throw ComputationError("train_step: non-finite gradient in " + t.name + "[" + std::to_string(i) + "]");
      }
    }
  }
  optimizer.apply(params, grads);
  return metrics;
}

LinearGenerator make_generator(const TrainConfig& config) {
  return LinearGenerator(config.model.embedding.d, config.d_img, config.generator_seed);
}

std::vector<std::vector<TrainSample>> make_epoch_batches(const Dataset& data, int batch_size,
                                                         std::mt19937_64& rng) {
  const auto train_set = data.train();
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_int_distribution<int> pick_level(0, kLevels - 1);

  std::vector<std::vector<TrainSample>> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    if (end - start < 2) break;
    std::vector<TrainSample> batch;
    batch.reserve(end - start);
    for (std::size_t k = start; k < end; ++k) {
      const auto& obj = train_set[order[k]];
      const auto level = static_cast<AbstractionLevel>(pick_level(rng));
      const std::uint64_t noise_seed = rng();
      auto sketch = render_partial_sketch(data, obj, completion_of(level), noise_seed);
      batch.push_back({std::move(sketch.obs), obj.photo_obs, level});
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

TrainResult train(const Dataset& data, const TrainConfig& config) {
  config.validate();
  if (config.d_img != data.config.d_obs) {
    throw InvalidInput("train: d_img must equal the dataset's d_obs (photo observations are the reconstruction target)");
  }
  const auto gen = make_generator(config);
  std::mt19937_64 rng(config.seed);
  TrainResult result;
  result.initial = init_params(data.config.d_obs, config.model, derive_seed(config.seed, 1));
  result.params = result.initial;
  Optimizer optimizer(config.optimizer, config.lr, result.params);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches = make_epoch_batches(data, config.batch_size, rng);
    EpochMetrics em;
    em.epoch = epoch;
    for (const auto& batch : batches) {
      const auto m = train_step(batch, result.params, optimizer, config, gen, rng);
      em.total += m.total;
      em.recons += m.components.recons;
      em.ranking += m.components.accq;
      em.abs += m.components.abs;
      em.batch_acc1 += m.batch_acc1;
      for (int l = 0; l < kLevels; ++l) em.level_histogram[l] += m.level_histogram[l];
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, batches.size()));
    em.total /= n;
    em.recons /= n;
    em.ranking /= n;
    em.abs /= n;
    em.batch_acc1 /= n;
    result.log.push_back(em);
  }
  return result;
}

std::string metrics_csv(std::span<const EpochMetrics> log) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,L_total,L_recons,L_accq,L_abs,batch_acc1\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << e.total << ',' << e.recons << ',' << e.ranking << ',' << e.abs << ','
        << e.batch_acc1 << '\n';
  }
  return out.str();
}

double GradcheckReport::worst() const {
  double w = 0.0;
  for (const auto& g : groups) w = std::max(w, g.max_rel_error);
  return w;
}

GradcheckReport gradcheck(const ModelParams& params, std::span<const TrainSample> batch,
                          const TrainConfig& config, const GeneratorOracle& gen,
                          std::uint64_t noise_seed, double step) {
  // The straight-through estimator is not the derivative of the hard
  // forward pass, so the check runs the relaxed sample.
  TrainConfig cfg = config;
  cfg.gumbel_hard = false;
  std::mt19937_64 rng(noise_seed);
  const StepNoise noise = sample_step_noise(batch.size(), rng);

  ModelParams analytic = params.zeros_like();
  evaluate_objective(params, batch, cfg, gen, noise, &analytic);

  ModelParams probe = params;
  auto probe_t = probe.tensors();
  auto analytic_t = analytic.tensors();

  struct Acc {
    double max_diff = 0.0;
    double max_scale = 0.0;
    GroupGradError worst;
  };
  std::vector<std::pair<std::string, Acc>> acc;
  auto slot = [&](const std::string& group) -> Acc& {
    for (auto& [g, a] : acc) {
      if (g == group) return a;
    }
    acc.emplace_back(group, Acc{});
    acc.back().second.worst.group = group;
    return acc.back().second;
  };

  for (std::size_t k = 0; k < probe_t.size(); ++k) {
    auto& t = probe_t[k];
    Acc& a = slot(t.group);
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double orig = t.data[i];
      t.data[i] = orig + step;
      const double up = evaluate_objective(probe, batch, cfg, gen, noise, nullptr).total;
      t.data[i] = orig - step;
      const double down = evaluate_objective(probe, batch, cfg, gen, noise, nullptr).total;
      t.data[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double an = analytic_t[k].data[i];
      const double diff = std::abs(an - numeric);
      a.max_scale = std::max({a.max_scale, std::abs(an), std::abs(numeric)});
      if (diff >= a.max_diff) {
        a.max_diff = diff;
        a.worst.worst_tensor = t.name;
        a.worst.worst_index = i;
        a.worst.analytic = an;
        a.worst.numeric = numeric;
      }
    }
  }
  GradcheckReport report;
  for (auto& [g, a] : acc) {
    a.worst.max_rel_error = a.max_diff / std::max(a.max_scale, 1e-12);
    report.groups.push_back(a.worst);
  }
  return report;
}

}  // namespace sketchabs
