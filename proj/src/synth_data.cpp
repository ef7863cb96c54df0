#include "sketchabs/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "sketchabs/config.hpp"
#include "sketchabs/digest.hpp"

namespace sketchabs {

using nlohmann::json;

void DataConfig::validate() const {
  if (n_objects < 2) throw InvalidInput("data: n_objects must be >= 2");
  if (d_z < 4 || d_obs < 4) throw InvalidInput("data: d_z and d_obs must be >= 4");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidInput("data: sigma must be >= 0");
}

std::span<const SyntheticObject> Dataset::train() const {
  return std::span<const SyntheticObject>(objects).first(n_train);
}

std::span<const SyntheticObject> Dataset::test() const {
  return std::span<const SyntheticObject>(objects).subspan(n_train);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a simple combination.
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

namespace {

enum StreamTag : std::uint64_t { kPhotoProj = 1, kSketchProj = 2, kEnergyPerm = 3, kObject = 4 };

Matrix gaussian_matrix(int rows, int cols, double stddev, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = normal(rng);
  }
  return m;
}

}  // namespace

Dataset generate_dataset(const DataConfig& config) {
  config.validate();
  Dataset data;
  data.config = config;
  const double proj_std = 1.0 / std::sqrt(static_cast<double>(config.d_obs));

  // Random assignment of decaying column scales so the energy order is a
  // nontrivial permutation of the latent coordinates.
  std::vector<int> rank_of(config.d_z);
  std::iota(rank_of.begin(), rank_of.end(), 0);
  std::mt19937_64 perm_rng(derive_seed(config.seed, kEnergyPerm));
  std::shuffle(rank_of.begin(), rank_of.end(), perm_rng);

  data.photo_projection = gaussian_matrix(config.d_obs, config.d_z, proj_std,
                                          derive_seed(config.seed, kPhotoProj));
  for (int c = 0; c < config.d_z; ++c) {
    data.photo_projection.col(c) *= std::pow(kEnergyDecay, rank_of[c]);
  }
  data.sketch_projection = gaussian_matrix(config.d_obs, config.d_z, proj_std,
                                           derive_seed(config.seed, kSketchProj));

  std::vector<double> energy(config.d_z);
  for (int c = 0; c < config.d_z; ++c) energy[c] = data.photo_projection.col(c).squaredNorm();
  data.stroke_order.resize(config.d_z);
  std::iota(data.stroke_order.begin(), data.stroke_order.end(), 0);
  std::stable_sort(data.stroke_order.begin(), data.stroke_order.end(),
                   [&](int a, int b) { return energy[a] > energy[b]; });

  data.objects.resize(config.n_objects);
  for (int i = 0; i < config.n_objects; ++i) {
    std::mt19937_64 rng(derive_seed(config.seed, kObject, static_cast<std::uint64_t>(i)));
    std::normal_distribution<double> normal(0.0, 1.0);
    auto& obj = data.objects[i];
    obj.id = i;
    obj.z.resize(config.d_z);
    for (int c = 0; c < config.d_z; ++c) obj.z[c] = normal(rng);
    obj.photo_obs = data.photo_projection * obj.z;
  }
  data.n_train = config.n_objects * 4 / 5;
  return data;
}

Vector reveal_mask(double t, std::span<const int> stroke_order) {
  if (!(t > 0.0) || t > 1.0) throw InvalidInput("reveal_mask: t must be in (0, 1]");
  const auto dz = static_cast<int>(stroke_order.size());
  // Guard against t * d_z landing a hair above an integer.
  const int count = std::min(dz, static_cast<int>(std::ceil(t * dz - 1e-9)));
  Vector mask = Vector::Zero(dz);
  for (int k = 0; k < count; ++k) mask[stroke_order[k]] = 1.0;
  return mask;
}

SketchObservation render_partial_sketch(const Dataset& data, const SyntheticObject& object,
                                        double t, std::uint64_t noise_seed) {
  if (!(t > 0.0) || t > 1.0) throw InvalidInput("render_partial_sketch: t must be in (0, 1]");
  SketchObservation s;
  s.object_id = object.id;
  s.t = t;
  s.level = assign_abstraction_label(t);
  const Vector revealed = object.z.cwiseProduct(reveal_mask(t, data.stroke_order));
  s.obs = data.sketch_projection * revealed;
  if (data.config.sigma > 0.0) {
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index k = 0; k < s.obs.size(); ++k) s.obs[k] += data.config.sigma * normal(rng);
  }
  return s;
}

AbstractionLevel assign_abstraction_label(double t) {
  if (t < 0.45) return AbstractionLevel::kCoarse;
  if (t < 0.80) return AbstractionLevel::kMid;
  return AbstractionLevel::kFine;
}

namespace {

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).data(), m.row(r).data() + m.cols()));
  }
  return rows;
}

Vector json_vec(const json& j, Eigen::Index expected) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != expected) throw FormatError("dataset: vector length mismatch");
  return Eigen::Map<const Vector>(v.data(), expected);
}

Matrix json_mat(const json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw FormatError("dataset: matrix row count mismatch");
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) m.row(r) = json_vec(j[r], cols).transpose();
  return m;
}

// Preview sketches written for inspection; training re-renders its own.
constexpr double kPreviewCompletions[] = {0.30, 0.60, 1.00};

}  // namespace

DatasetManifest write_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create directory " + dir.string() + ": " + ec.message());

  std::ostringstream out;
  json header = {{"kind", "header"},
                 {"format_version", kDatasetFormatVersion},
                 {"data", data_config_json(data.config)},
                 {"n_train", data.n_train},
                 {"stroke_order", data.stroke_order},
                 {"photo_projection", mat_json(data.photo_projection)},
                 {"sketch_projection", mat_json(data.sketch_projection)}};
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < data.objects.size(); ++i) {
    const auto& obj = data.objects[i];
    json rec = {{"kind", "object"},
                {"id", obj.id},
                {"split", static_cast<int>(i) < data.n_train ? "train" : "test"},
                {"z", vec_json(obj.z)},
                {"photo", vec_json(obj.photo_obs)}};
    out << rec.dump() << '\n';
  }
  for (const auto& obj : data.test()) {
    for (std::size_t k = 0; k < std::size(kPreviewCompletions); ++k) {
      const double t = kPreviewCompletions[k];
      const auto s = render_partial_sketch(data, obj, t, derive_seed(data.config.seed, 100 + k, obj.id));
      json rec = {{"kind", "sketch"},
                  {"id", s.object_id},
                  {"t", s.t},
                  {"level", level_name(s.level)},
                  {"obs", vec_json(s.obs)}};
      out << rec.dump() << '\n';
    }
  }
  const std::string body = out.str();
  write_file(dir / kDatasetFile, body);

  DatasetManifest m;
  m.data_config_digest = data_config_digest(data.config);
  m.content_digest = digest_of(body);
  m.seed = data.config.seed;
  m.n_objects = static_cast<int>(data.objects.size());
  m.n_train = data.n_train;
  m.n_test = m.n_objects - m.n_train;
  json mj = {{"format_version", m.format_version},
             {"data_config_digest", m.data_config_digest},
             {"content_digest", m.content_digest},
             {"seed", m.seed},
             {"n_objects", m.n_objects},
             {"n_train", m.n_train},
             {"n_test", m.n_test}};
  write_file(dir / kManifestFile, mj.dump(2) + "\n");
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  DatasetManifest m;
  try {
    const auto j = json::parse(read_file(dir / kManifestFile));
    m.format_version = j.at("format_version").get<int>();
    m.data_config_digest = j.at("data_config_digest").get<std::string>();
    m.content_digest = j.at("content_digest").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.n_objects = j.at("n_objects").get<int>();
    m.n_train = j.at("n_train").get<int>();
    m.n_test = j.at("n_test").get<int>();
  } catch (const json::exception& e) {
    throw FormatError("manifest " + (dir / kManifestFile).string() + ": " + e.what());
  }
  if (m.format_version != kDatasetFormatVersion) {
    throw FormatError("manifest: unsupported dataset format version " + std::to_string(m.format_version));
  }
  return m;
}

Dataset read_dataset(const std::filesystem::path& dir, DatasetManifest* manifest_out) {
  const auto manifest = read_manifest(dir);
  const std::string body = read_file(dir / kDatasetFile);
  if (digest_of(body) != manifest.content_digest) {
    throw FormatError("dataset " + (dir / kDatasetFile).string() + ": content digest does not match manifest");
  }
  Dataset data;
  try {
    std::istringstream in(body);
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto rec = json::parse(line);
      const auto kind = rec.at("kind").get<std::string>();
      if (kind == "header") {
        if (rec.at("format_version").get<int>() != kDatasetFormatVersion) {
          throw FormatError("dataset: unsupported format version");
        }
        const auto& dj = rec.at("data");
        data.config.n_objects = dj.at("n_objects").get<int>();
        data.config.d_z = dj.at("d_z").get<int>();
        data.config.d_obs = dj.at("d_obs").get<int>();
        data.config.sigma = dj.at("sigma").get<double>();
        data.config.seed = dj.at("seed").get<std::uint64_t>();
        data.n_train = rec.at("n_train").get<int>();
        data.stroke_order = rec.at("stroke_order").get<std::vector<int>>();
        data.photo_projection = json_mat(rec.at("photo_projection"), data.config.d_obs, data.config.d_z);
        data.sketch_projection = json_mat(rec.at("sketch_projection"), data.config.d_obs, data.config.d_z);
        have_header = true;
      } else if (kind == "object") {
        if (!have_header) throw FormatError("dataset: object record before header");
        SyntheticObject obj;
        obj.id = rec.at("id").get<int>();
        obj.z = json_vec(rec.at("z"), data.config.d_z);
        obj.photo_obs = json_vec(rec.at("photo"), data.config.d_obs);
        data.objects.push_back(std::move(obj));
      }
    }
    if (!have_header) throw FormatError("dataset: missing header");
  } catch (const json::exception& e) {
    throw FormatError("dataset " + (dir / kDatasetFile).string() + ": " + e.what());
  }
  if (static_cast<int>(data.objects.size()) != data.config.n_objects) {
    throw FormatError("dataset: object count does not match header");
  }
  if (manifest_out) *manifest_out = manifest;
  return data;
}

}  // namespace sketchabs
