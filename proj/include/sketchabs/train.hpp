#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sketchabs/accq_loss.hpp"
#include "sketchabs/aux_losses.hpp"
#include "sketchabs/model.hpp"
#include "sketchabs/synth_data.hpp"

namespace sketchabs {

enum class RankingLoss { kAccq, kTriplet };

struct TrainConfig {
  ModelConfig model;
  int batch_size = 32;
  int epochs = 3000;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  LossWeights weights;
  /// accq.q is only used when per_level_q is false.
  AccqConfig accq;
  LevelQMap level_q;
  bool per_level_q = true;
  TripletConfig triplet;
  RankingLoss ranking = RankingLoss::kAccq;
  bool use_mask = true;
  /// Reuse one padding draw for every step instead of resampling.
  bool freeze_padding = false;
  double gumbel_temperature = 1.0;
  bool gumbel_hard = true;
  std::uint64_t generator_seed = 11;
  /// Generator output size; the photo observation is the reconstruction
  /// target, so this must equal the dataset's d_obs.
  int d_img = 32;

  void validate() const;
};

struct TrainSample {
  Vector sketch_obs;
  Vector photo_obs;
  AbstractionLevel level = AbstractionLevel::kFine;
};

/// Random draws consumed by one objective evaluation. Holding them fixed
/// makes the objective a deterministic function of the parameters.
struct StepNoise {
  std::vector<Vec3> gumbel;
  std::uint64_t padding_seed = 0;
};

StepNoise sample_step_noise(std::size_t batch_size, std::mt19937_64& rng);

struct StepMetrics {
  LossComponents components;  // components.accq holds the triplet value in triplet mode
  double total = 0.0;
  double batch_acc1 = 0.0;
  std::array<int, kLevels> level_histogram{};
};

/// L_total on one batch; accumulates d L_total / d params into `grads` when
/// non-null.
StepMetrics evaluate_objective(const ModelParams& params, std::span<const TrainSample> batch,
                               const TrainConfig& config, const GeneratorOracle& gen,
                               const StepNoise& noise, ModelParams* grads);

/// One optimizer step. Aborts with ComputationError on a non-finite gradient.
StepMetrics train_step(std::span<const TrainSample> batch, ModelParams& params, Optimizer& optimizer,
                       const TrainConfig& config, const GeneratorOracle& gen, std::mt19937_64& rng);

struct EpochMetrics {
  int epoch = 0;
  double total = 0.0;
  double recons = 0.0;
  double ranking = 0.0;
  double abs = 0.0;
  double batch_acc1 = 0.0;
  std::array<int, kLevels> level_histogram{};
};

struct TrainResult {
  ModelParams initial;
  ModelParams params;
  std::vector<EpochMetrics> log;
};

LinearGenerator make_generator(const TrainConfig& config);

/// Batches for one epoch: shuffled train objects, each sketch rendered at a
/// completion drawn uniformly from {0.3, 0.6, 1.0}.
std::vector<std::vector<TrainSample>> make_epoch_batches(const Dataset& data, int batch_size,
                                                         std::mt19937_64& rng);

TrainResult train(const Dataset& data, const TrainConfig& config);

/// "epoch,L_total,L_recons,L_accq,L_abs,batch_acc1" plus one row per epoch.
std::string metrics_csv(std::span<const EpochMetrics> log);

struct GroupGradError {
  std::string group;
  double max_rel_error = 0.0;
  std::string worst_tensor;
  Eigen::Index worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradcheckReport {
  std::vector<GroupGradError> groups;
  double worst() const;
};

/// Central differences of L_total w.r.t. every parameter against the
/// analytic gradient, with Gumbel noise and padding frozen. The error of a
/// group is max|a - n| / max(max|a|, max|n|, 1e-12) over its entries.
GradcheckReport gradcheck(const ModelParams& params, std::span<const TrainSample> batch,
                          const TrainConfig& config, const GeneratorOracle& gen,
                          std::uint64_t noise_seed, double step = 1e-5);

}  // namespace sketchabs
