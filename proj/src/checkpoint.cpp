#include "sketchabs/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <sstream>

#include "sketchabs/digest.hpp"

namespace sketchabs {

namespace {

constexpr const char* kMagic = "SKETCHABS-CHECKPOINT";
constexpr const char* kEndHeader = "end_header";

void put_f32_le(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffU));
}

double get_f32_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return static_cast<double>(std::bit_cast<float>(bits));
}

template <typename T>
T expect_field(std::istringstream& in, const std::string& key) {
  std::string k;
  T v{};
  if (!(in >> k >> v) || k != key) throw FormatError("checkpoint: expected header field '" + key + "'");
  return v;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  ModelParams params = ckpt.params;
  const auto& cfg = params.config;
  std::ostringstream h;
  h << kMagic << '\n'
    << "format_version " << kCheckpointVersion << '\n'
    << "config_digest " << (ckpt.config_digest.empty() ? "-" : ckpt.config_digest) << '\n'
    << "data_digest " << (ckpt.data_digest.empty() ? "-" : ckpt.data_digest) << '\n'
    << "d_obs " << params.d_obs << '\n'
    << "hidden " << cfg.hidden << '\n'
    << "feature_groups " << cfg.feature_groups << '\n'
    << "d " << cfg.embedding.d << '\n'
    << "group_sizes " << cfg.embedding.group_sizes[0] << ' ' << cfg.embedding.group_sizes[1] << ' '
    << cfg.embedding.group_sizes[2] << '\n';
  const auto tensors = params.tensors();
  h << "tensors " << tensors.size() << '\n';
  for (const auto& t : tensors) h << "tensor " << t.name << ' ' << t.rows << ' ' << t.cols << '\n';
  h << kEndHeader << '\n';

  std::string out = h.str();
  out.reserve(out.size() + 4 * params.parameter_count());
  for (const auto& t : tensors) {
    for (Eigen::Index i = 0; i < t.size(); ++i) put_f32_le(out, t.data[i]);
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  const std::string marker = std::string("\n") + kEndHeader + "\n";
  const auto end = bytes.find(marker);
  if (bytes.rfind(kMagic, 0) != 0 || end == std::string::npos) {
    throw FormatError("checkpoint: missing magic or header terminator");
  }
  std::istringstream in(bytes.substr(0, end));
  std::string magic;
  in >> magic;
  const int version = expect_field<int>(in, "format_version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported format version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config_digest = expect_field<std::string>(in, "config_digest");
  ckpt.data_digest = expect_field<std::string>(in, "data_digest");
  if (ckpt.config_digest == "-") ckpt.config_digest.clear();
  if (ckpt.data_digest == "-") ckpt.data_digest.clear();
  const int d_obs = expect_field<int>(in, "d_obs");
  ModelConfig cfg;
  cfg.hidden = expect_field<int>(in, "hidden");
  cfg.feature_groups = expect_field<int>(in, "feature_groups");
  cfg.embedding.d = expect_field<int>(in, "d");
  std::string key;
  if (!(in >> key) || key != "group_sizes" ||
      !(in >> cfg.embedding.group_sizes[0] >> cfg.embedding.group_sizes[1] >>
        cfg.embedding.group_sizes[2])) {
    throw FormatError("checkpoint: expected header field 'group_sizes'");
  }
  try {
    ckpt.params = zero_params(d_obs, cfg);
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("checkpoint: invalid shapes: ") + e.what());
  }
  auto tensors = ckpt.params.tensors();
  const auto count = expect_field<std::size_t>(in, "tensors");
  if (count != tensors.size()) throw FormatError("checkpoint: tensor count mismatch");
  std::size_t payload = 0;
  for (const auto& t : tensors) {
    std::string tag, name;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> tag >> name >> rows >> cols) || tag != "tensor" || name != t.name || rows != t.rows ||
        cols != t.cols) {
      throw FormatError("checkpoint: tensor table does not match model shape at " + t.name);
    }
    payload += static_cast<std::size_t>(t.size()) * 4;
  }
  const std::size_t offset = end + marker.size();
  if (bytes.size() != offset + payload) throw FormatError("checkpoint: payload size mismatch");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + offset;
  for (auto& t : tensors) {
    for (Eigen::Index i = 0; i < t.size(); ++i, p += 4) t.data[i] = get_f32_le(p);
  }
  if (!ckpt.params.all_finite()) throw FormatError("checkpoint: non-finite parameter values");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return deserialize_checkpoint(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace sketchabs
