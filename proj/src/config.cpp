#include "sketchabs/config.hpp"

#include <set>

#include "sketchabs/digest.hpp"

namespace sketchabs {

using nlohmann::json;

namespace {

// Reads optional keys from one section and rejects anything it did not
// consume.
class Section {
 public:
  Section(const json& root, const char* name) : name_(name) {
    if (root.contains(name)) {
      node_ = root.at(name);
      if (!node_.is_object()) throw InvalidInput(std::string("config: section '") + name + "' must be an object");
    } else {
      node_ = json::object();
    }
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!node_.contains(key)) return;
    const auto& v = node_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(key, "a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(key, "an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) fail(key, "non-negative");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(key, "a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(key, "a string");
    }
    out = v.get<T>();
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) throw InvalidInput("config: unknown key '" + name_ + "." + key + "'");
    }
  }

 private:
  [[noreturn]] void fail(const char* key, const char* what) const {
    throw InvalidInput("config: '" + name_ + "." + key + "' must be " + what);
  }

  std::string name_;
  json node_;
  std::set<std::string> seen_;
};

const std::set<std::string> kSections = {"data", "model", "train", "accq", "weights", "triplet", "generator"};

}  // namespace

RunConfig parse_sections(const json& j);

void RunConfig::validate() const {
  data.validate();
  train.validate();
}

RunConfig parse_run_config(const json& j) {
  try {
    return parse_sections(j);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
}

RunConfig parse_sections(const json& j) {
  if (!j.is_object()) throw InvalidInput("config: top level must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!kSections.count(key)) throw InvalidInput("config: unknown section '" + key + "'");
  }
  RunConfig c;
  auto& t = c.train;

  Section data(j, "data");
  data.read("n_objects", c.data.n_objects);
  data.read("d_z", c.data.d_z);
  data.read("d_obs", c.data.d_obs);
  data.read("sigma", c.data.sigma);
  data.read("seed", c.data.seed);
  data.finish();

  Section model(j, "model");
  model.read("d", t.model.embedding.d);
  model.read("hidden", t.model.hidden);
  model.read("feature_groups", t.model.feature_groups);
  std::vector<int> groups(t.model.embedding.group_sizes.begin(), t.model.embedding.group_sizes.end());
  model.read("group_sizes", groups);
  if (groups.size() != 3) throw InvalidInput("config: 'model.group_sizes' must have 3 entries");
  std::copy(groups.begin(), groups.end(), t.model.embedding.group_sizes.begin());
  model.finish();

  Section train(j, "train");
  train.read("batch_size", t.batch_size);
  train.read("epochs", t.epochs);
  train.read("lr", t.lr);
  train.read("seed", t.seed);
  std::string optimizer = t.optimizer == OptimizerKind::kAdam ? "adam" : "sgd";
  train.read("optimizer", optimizer);
  if (optimizer == "adam") {
    t.optimizer = OptimizerKind::kAdam;
  } else if (optimizer == "sgd") {
    t.optimizer = OptimizerKind::kSgd;
  } else {
    throw InvalidInput("config: 'train.optimizer' must be \"adam\" or \"sgd\"");
  }
  std::string loss = t.ranking == RankingLoss::kAccq ? "accq" : "triplet";
  train.read("loss", loss);
  if (loss == "accq") {
    t.ranking = RankingLoss::kAccq;
  } else if (loss == "triplet") {
    t.ranking = RankingLoss::kTriplet;
  } else {
    throw InvalidInput("config: 'train.loss' must be \"accq\" or \"triplet\"");
  }
  train.read("use_mask", t.use_mask);
  train.read("freeze_padding", t.freeze_padding);
  train.read("per_level_q", t.per_level_q);
  train.read("gumbel_temperature", t.gumbel_temperature);
  train.read("gumbel_hard", t.gumbel_hard);
  train.finish();

  Section accq(j, "accq");
  accq.read("q", t.accq.q);
  accq.read("tau1", t.accq.tau1);
  accq.read("tau2", t.accq.tau2);
  accq.read("q_coarse", t.level_q.coarse);
  accq.read("q_mid", t.level_q.mid);
  accq.read("q_fine", t.level_q.fine);
  accq.finish();

  Section weights(j, "weights");
  weights.read("recons", t.weights.recons);
  weights.read("accq", t.weights.accq);
  weights.read("abs", t.weights.abs);
  weights.finish();

  Section triplet(j, "triplet");
  triplet.read("margin", t.triplet.margin);
  triplet.finish();

  Section gen(j, "generator");
  gen.read("seed", t.generator_seed);
  gen.read("d_img", t.d_img);
  gen.finish();

  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw InvalidInput("config " + path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
  return parse_run_config(j);
}

json data_config_json(const DataConfig& d) {
  return {{"n_objects", d.n_objects}, {"d_z", d.d_z}, {"d_obs", d.d_obs}, {"sigma", d.sigma}, {"seed", d.seed}};
}

json to_json(const RunConfig& c) {
  const auto& t = c.train;
  const auto& g = t.model.embedding.group_sizes;
  return {
      {"data", data_config_json(c.data)},
      {"model",
       {{"d", t.model.embedding.d},
        {"hidden", t.model.hidden},
        {"feature_groups", t.model.feature_groups},
        {"group_sizes", {g[0], g[1], g[2]}}}},
      {"train",
       {{"batch_size", t.batch_size},
        {"epochs", t.epochs},
        {"lr", t.lr},
        {"seed", t.seed},
        {"optimizer", t.optimizer == OptimizerKind::kAdam ? "adam" : "sgd"},
        {"loss", t.ranking == RankingLoss::kAccq ? "accq" : "triplet"},
        {"use_mask", t.use_mask},
        {"freeze_padding", t.freeze_padding},
        {"per_level_q", t.per_level_q},
        {"gumbel_temperature", t.gumbel_temperature},
        {"gumbel_hard", t.gumbel_hard}}},
      {"accq",
       {{"q", t.accq.q},
        {"tau1", t.accq.tau1},
        {"tau2", t.accq.tau2},
        {"q_coarse", t.level_q.coarse},
        {"q_mid", t.level_q.mid},
        {"q_fine", t.level_q.fine}}},
      {"weights", {{"recons", t.weights.recons}, {"accq", t.weights.accq}, {"abs", t.weights.abs}}},
      {"triplet", {{"margin", t.triplet.margin}}},
      {"generator", {{"seed", t.generator_seed}, {"d_img", t.d_img}}},
  };
}

std::string config_digest(const RunConfig& config) { return digest_of(to_json(config).dump()); }

std::string data_config_digest(const DataConfig& data) {
  auto j = data_config_json(data);
  j.erase("seed");
  return digest_of(j.dump());
}

}  // namespace sketchabs
