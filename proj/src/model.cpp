#include "sketchabs/model.hpp"

#include <cmath>
#include <random>

namespace sketchabs {

void ModelConfig::validate() const {
  embedding.validate();
  if (hidden <= 0) throw InvalidInput("model: hidden width must be positive");
  if (feature_groups <= 0) throw InvalidInput("model: feature_groups must be positive");
}

namespace {

void push(std::vector<TensorView>& out, std::string name, std::string group, Matrix& m) {
  out.push_back({std::move(name), std::move(group), m.data(), m.rows(), m.cols()});
}

void push(std::vector<TensorView>& out, std::string name, std::string group, Vector& v) {
  out.push_back({std::move(name), std::move(group), v.data(), v.size(), 1});
}

AffineLayer zero_layer(int out, int in) {
  return AffineLayer{Matrix::Zero(out, in), Vector::Zero(out)};
}

void fill_gaussian(Matrix& m, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
}

}  // namespace

std::vector<TensorView> ModelParams::tensors() {
  std::vector<TensorView> out;
  push(out, "backbone.in.weight", "backbone", backbone_in.weight);
  push(out, "backbone.in.bias", "backbone", backbone_in.bias);
  push(out, "backbone.out.weight", "backbone", backbone_out.weight);
  push(out, "backbone.out.bias", "backbone", backbone_out.bias);
  for (int k = 0; k < kStructuralRows; ++k) {
    const auto p = "sketch_head." + std::to_string(k);
    push(out, p + ".weight", "sketch_heads", sketch_heads[k].weight);
    push(out, p + ".bias", "sketch_heads", sketch_heads[k].bias);
  }
  for (int k = 0; k < kStructuralRows; ++k) {
    const auto p = "photo_head." + std::to_string(k);
    push(out, p + ".weight", "photo_heads", photo_heads[k].weight);
    push(out, p + ".bias", "photo_heads", photo_heads[k].bias);
  }
  out.push_back({"abs_head.weight", "abs_head", abs_head.weight.data(), abs_head.weight.rows(),
                 abs_head.weight.cols()});
  out.push_back({"abs_head.bias", "abs_head", abs_head.bias.data(), kLevels, 1});
  return out;
}

std::vector<std::pair<std::string, Eigen::Index>> ModelParams::tensor_shapes() const {
  std::vector<std::pair<std::string, Eigen::Index>> out;
  for (const auto& t : const_cast<ModelParams*>(this)->tensors()) out.emplace_back(t.name, t.size());
  return out;
}

ModelParams ModelParams::zeros_like() const { return zero_params(d_obs, config); }

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, size] : tensor_shapes()) n += static_cast<std::size_t>(size);
  return n;
}

bool ModelParams::all_finite() const {
  for (const auto& t : const_cast<ModelParams*>(this)->tensors()) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      if (!std::isfinite(t.data[i])) return false;
    }
  }
  return true;
}

bool ModelParams::operator==(const ModelParams& other) const {
  auto a = const_cast<ModelParams*>(this)->tensors();
  auto b = const_cast<ModelParams&>(other).tensors();
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].name != b[k].name || a[k].rows != b[k].rows || a[k].cols != b[k].cols) return false;
    for (Eigen::Index i = 0; i < a[k].size(); ++i) {
      if (a[k].data[i] != b[k].data[i]) return false;
    }
  }
  return true;
}

ModelParams zero_params(int d_obs, const ModelConfig& config) {
  config.validate();
  if (d_obs <= 0) throw InvalidInput("model: input dimension must be positive");
  ModelParams p;
  p.d_obs = d_obs;
  p.config = config;
  const int d = config.embedding.d;
  const int feat = d * config.feature_groups;
  p.backbone_in = zero_layer(config.hidden, d_obs);
  p.backbone_out = zero_layer(feat, config.hidden);
  for (int k = 0; k < kStructuralRows; ++k) {
    p.sketch_heads[k] = zero_layer(d, feat);
    p.photo_heads[k] = zero_layer(d, feat);
  }
  p.abs_head = AbstractionHead::zeros(d);
  return p;
}

ModelParams init_params(int d_obs, const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = zero_params(d_obs, config);
  std::mt19937_64 rng(seed);
  const int feat = p.feature_dim();
  fill_gaussian(p.backbone_in.weight, 1.0 / std::sqrt(static_cast<double>(d_obs)), rng);
  fill_gaussian(p.backbone_out.weight, 1.0 / std::sqrt(static_cast<double>(config.hidden)), rng);
  for (int k = 0; k < kStructuralRows; ++k) {
    fill_gaussian(p.sketch_heads[k].weight, 1.0 / std::sqrt(static_cast<double>(feat)), rng);
  }
  for (int k = 0; k < kStructuralRows; ++k) {
    fill_gaussian(p.photo_heads[k].weight, 1.0 / std::sqrt(static_cast<double>(feat)), rng);
  }
  std::normal_distribution<double> small(0.0, 0.1 / std::sqrt(static_cast<double>(p.d())));
  for (Eigen::Index i = 0; i < p.abs_head.weight.size(); ++i) p.abs_head.weight.data()[i] = small(rng);
  round_to_float(p);
  return p;
}

void round_to_float(ModelParams& params) {
  for (auto& t : params.tensors()) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      t.data[i] = static_cast<double>(static_cast<float>(t.data[i]));
    }
  }
}

BranchCache forward(const ModelParams& params, const Vector& input, Branch branch) {
  if (input.size() != params.d_obs) throw InvalidInput("forward: observation dimension mismatch");
  if (!input.allFinite()) throw InvalidInput("forward: non-finite observation");
  BranchCache c;
  c.input = input;
  c.hidden = params.backbone_in.apply(input).array().tanh().matrix();
  c.feature = params.backbone_out.apply(c.hidden).array().tanh().matrix();
  const int d = params.d();
  const auto& heads = branch == Branch::kSketch ? params.sketch_heads : params.photo_heads;
  c.raw.resize(kStructuralRows, d);
  for (int k = 0; k < kStructuralRows; ++k) c.raw.row(k) = heads[k].apply(c.feature).transpose();
  c.embed = row_l2_normalize(c.raw);
  c.pooled = Vector::Zero(d);
  const int groups = params.config.feature_groups;
  for (int g = 0; g < groups; ++g) c.pooled += c.feature.segment(g * d, d);
  c.pooled /= static_cast<double>(groups);
  return c;
}

void backward(const ModelParams& params, const BranchCache& cache, Branch branch,
              const FeatureMatrix& d_embed, const Vector& d_pooled, ModelParams& grads) {
  const int d = params.d();
  const FeatureMatrix d_raw = row_l2_normalize_backward(cache.raw, d_embed);
  const auto& heads = branch == Branch::kSketch ? params.sketch_heads : params.photo_heads;
  auto& head_grads = branch == Branch::kSketch ? grads.sketch_heads : grads.photo_heads;

  Vector d_feature = Vector::Zero(params.feature_dim());
  for (int k = 0; k < kStructuralRows; ++k) {
    const Vector g = d_raw.row(k).transpose();
    if (g.isZero(0.0)) continue;
    head_grads[k].weight.noalias() += g * cache.feature.transpose();
    head_grads[k].bias += g;
    d_feature.noalias() += heads[k].weight.transpose() * g;
  }
  if (d_pooled.size() == d) {
    const int groups = params.config.feature_groups;
    for (int g = 0; g < groups; ++g) d_feature.segment(g * d, d) += d_pooled / groups;
  }
  const Vector d_pre_out =
      (d_feature.array() * (1.0 - cache.feature.array().square())).matrix();
  grads.backbone_out.weight.noalias() += d_pre_out * cache.hidden.transpose();
  grads.backbone_out.bias += d_pre_out;
  const Vector d_hidden = params.backbone_out.weight.transpose() * d_pre_out;
  const Vector d_pre_in = (d_hidden.array() * (1.0 - cache.hidden.array().square())).matrix();
  grads.backbone_in.weight.noalias() += d_pre_in * cache.input.transpose();
  grads.backbone_in.bias += d_pre_in;
}

Optimizer::Optimizer(OptimizerKind kind_, double lr_, const ModelParams& like)
    : kind(kind_), lr(lr_), first_moment(like.zeros_like()), second_moment(like.zeros_like()) {
  if (!(lr >= 0.0)) throw InvalidInput("optimizer: learning rate must be non-negative");
}

void Optimizer::apply(ModelParams& params, ModelParams& grads) {
  ++step;
  auto p = params.tensors();
  auto g = grads.tensors();
  if (kind == OptimizerKind::kSgd) {
    for (std::size_t k = 0; k < p.size(); ++k) {
      for (Eigen::Index i = 0; i < p[k].size(); ++i) p[k].data[i] -= lr * g[k].data[i];
    }
  } else {
    auto m = first_moment.tensors();
    auto v = second_moment.tensors();
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t k = 0; k < p.size(); ++k) {
      for (Eigen::Index i = 0; i < p[k].size(); ++i) {
        const double gi = g[k].data[i];
        double& mi = m[k].data[i];
        double& vi = v[k].data[i];
        mi = beta1 * mi + (1.0 - beta1) * gi;
        vi = beta2 * vi + (1.0 - beta2) * gi * gi;
        p[k].data[i] -= lr * (mi / c1) / (std::sqrt(vi / c2) + eps);
      }
    }
  }
  round_to_float(params);
}

}  // namespace sketchabs
