#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sketchabs/checkpoint.hpp"
#include "sketchabs/config.hpp"
#include "sketchabs/evaluation.hpp"
#include "sketchabs/train.hpp"

using namespace sketchabs;
namespace fs = std::filesystem;

namespace {

constexpr int kExitComputation = 1;
constexpr int kExitUsage = 2;

constexpr const char* kCheckpointFile = "model.ckpt";
constexpr const char* kMetricsFile = "metrics.csv";
constexpr const char* kResolvedConfigFile = "config.json";

RunConfig load_config(const std::string& path) {
  return path.empty() ? RunConfig{} : load_run_config(path);
}

// Loads the dataset and refuses it if it was generated from a different
// data configuration than the one in the run config.
Dataset load_checked_dataset(const std::string& dir, const DataConfig& expected, DatasetManifest& manifest) {
  Dataset data = read_dataset(dir, &manifest);
  if (manifest.data_config_digest != data_config_digest(expected)) {
    throw FormatError("dataset " + dir + " was generated with a different data config (digest " +
                      manifest.data_config_digest + ", config expects " + data_config_digest(expected) + ")");
  }
  return data;
}

struct EvalInputs {
  Checkpoint ckpt;
  Dataset data;
};

EvalInputs load_eval_inputs(const std::string& ckpt_path, const std::string& data_dir) {
  EvalInputs in{load_checkpoint(ckpt_path), {}};
  DatasetManifest manifest;
  in.data = read_dataset(data_dir, &manifest);
  check_compatible(in.ckpt, manifest, in.data);
  return in;
}

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
  } else {
    write_file(path, text);
  }
}

std::vector<double> grid_or_fail(int steps) {
  if (steps < 1 || steps > 10) throw InvalidInput("--steps must be between 1 and 10");
  return completion_grid(steps);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Abstraction-aware sketch retrieval: synthetic data, training and evaluation"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir, ckpt_path, report_path, csv_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::string loss;
  std::vector<int> q_list{1, 5, 10};
  int steps = 10;
  int batch = 8;
  double tau2 = 0.1;
  double threshold = 1e-4;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic corpus");
  gen->add_option("--config", config_path, "Run config (JSON)")->check(CLI::ExistingFile);
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--seed", seed, "Override data.seed");

  auto* tr = app.add_subcommand("train", "Train a model and write model.ckpt + metrics.csv");
  tr->add_option("--config", config_path, "Run config (JSON)")->check(CLI::ExistingFile);
  tr->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", out_dir, "Output directory")->required();
  tr->add_option("--loss", loss, "Ranking loss")->check(CLI::IsMember({"accq", "triplet"}));
  tr->add_option("--epochs", epochs, "Override train.epochs");
  tr->add_option("--seed", seed, "Override train.seed");

  auto add_eval_inputs = [&](CLI::App* sub) {
    sub->add_option("--ckpt", ckpt_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
    sub->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  };

  auto* ev = app.add_subcommand("eval", "Exact Acc@q on full sketches");
  add_eval_inputs(ev);
  ev->add_option("--q", q_list, "Rank thresholds")->delimiter(',');
  ev->add_option("--report", report_path, "Write the report here instead of stdout");

  auto* ent = app.add_subcommand("entropy", "Mean separation entropy over a completion grid");
  add_eval_inputs(ent);
  ent->add_option("--steps", steps, "Grid points k/steps");
  ent->add_option("--csv", csv_path, "Also write the curve as CSV");

  auto* early = app.add_subcommand("early", "m@A / m@B early-retrieval curves");
  add_eval_inputs(early);
  early->add_option("--steps", steps, "Grid points k/steps");
  early->add_option("--csv", csv_path, "Write t,m@A,m@B rows as CSV");

  auto* abl = app.add_subcommand("ablate", "Fixed 3/6/9-row and random mask ablation");
  add_eval_inputs(abl);
  abl->add_option("--q", q_list, "Rank thresholds")->delimiter(',');
  abl->add_option("--seed", seed, "Seed for random forcing");

  auto* gc = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  gc->add_option("--config", config_path, "Run config (JSON)")->check(CLI::ExistingFile);
  gc->add_option("--data", data_dir, "Dataset directory (default: generate from the config)")
      ->check(CLI::ExistingDirectory);
  gc->add_option("--ckpt", ckpt_path, "Check at these parameters instead of the initialization")
      ->check(CLI::ExistingFile);
  gc->add_option("--batch", batch, "Batch size");
  gc->add_option("--tau2", tau2, "Inner sigmoid temperature used for the check");
  gc->add_option("--threshold", threshold, "Exit 1 if the worst relative error exceeds this");
  gc->add_option("--seed", seed, "Noise seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) {
      RunConfig cfg = load_config(config_path);
      if (seed) cfg.data.seed = *seed;
      cfg.data.validate();
      const auto manifest = write_dataset(generate_dataset(cfg.data), out_dir);
      std::cout << "wrote " << (fs::path(out_dir) / kDatasetFile).string() << "\n"
                << "content_digest " << manifest.content_digest << "\n"
                << "train " << manifest.n_train << " test " << manifest.n_test << "\n";
    } else if (*tr) {
      RunConfig cfg = load_config(config_path);
      if (!loss.empty()) cfg.train.ranking = loss == "triplet" ? RankingLoss::kTriplet : RankingLoss::kAccq;
      if (epochs) cfg.train.epochs = *epochs;
      if (seed) cfg.train.seed = *seed;
      cfg.validate();
      DatasetManifest manifest;
      const Dataset data = load_checked_dataset(data_dir, cfg.data, manifest);
      const auto result = train(data, cfg.train);
      fs::create_directories(out_dir);
      const Checkpoint ckpt{result.params, config_digest(cfg), manifest.content_digest};
      save_checkpoint(ckpt, fs::path(out_dir) / kCheckpointFile);
      write_file(fs::path(out_dir) / kMetricsFile, metrics_csv(result.log));
      write_file(fs::path(out_dir) / kResolvedConfigFile, to_json(cfg).dump(2) + "\n");
      std::cout << "wrote " << (fs::path(out_dir) / kCheckpointFile).string() << "\n"
                << "config_digest " << ckpt.config_digest << "\n";
      if (!result.log.empty()) {
        const auto& last = result.log.back();
        std::printf("final epoch %d: L_total %.6f batch_acc1 %.4f\n", last.epoch, last.total, last.batch_acc1);
      }
    } else if (*ev) {
      const auto in = load_eval_inputs(ckpt_path, data_dir);
      EvalReport report;
      report.acc_at = evaluate_retrieval(in.ckpt.params, in.data, q_list, {}, &report.mask_histogram);
      write_or_print(report_path, report.to_text());
    } else if (*ent) {
      const auto grid = grid_or_fail(steps);
      const auto in = load_eval_inputs(ckpt_path, data_dir);
      EvalReport report;
      report.entropy_curve = entropy_study(in.ckpt.params, in.data, grid);
      std::cout << report.to_text();
      if (!csv_path.empty()) write_file(csv_path, curve_csv(report.entropy_curve));
    } else if (*early) {
      const auto grid = grid_or_fail(steps);
      const auto in = load_eval_inputs(ckpt_path, data_dir);
      const auto curves = early_retrieval_curves(in.ckpt.params, in.data, grid);
      EvalReport report;
      report.ma_curve = curves.ma;
      report.mb_curve = curves.mb;
      report.ma_auc = curves.ma_auc;
      report.mb_auc = curves.mb_auc;
      std::cout << report.to_text();
      if (!csv_path.empty()) {
        std::string csv = "t,m@A,m@B\n";
        for (std::size_t k = 0; k < curves.ma.size(); ++k) {
          csv += std::to_string(curves.ma[k].t) + "," + std::to_string(curves.ma[k].value) + "," +
                 std::to_string(curves.mb[k].value) + "\n";
        }
        write_file(csv_path, csv);
      }
    } else if (*abl) {
      const auto in = load_eval_inputs(ckpt_path, data_dir);
      const std::vector<MaskPolicy> settings{MaskPolicy::predicted(), MaskPolicy::fixed(3), MaskPolicy::fixed(6),
                                             MaskPolicy::fixed(9), MaskPolicy::random(seed.value_or(1))};
      std::cout << ablation_text(fixed_mask_ablation(in.ckpt.params, in.data, settings, q_list));
    } else if (*gc) {
      RunConfig cfg = load_config(config_path);
      cfg.train.accq.tau2 = tau2;
      cfg.validate();
      if (batch < 2) throw InvalidInput("--batch must be >= 2");
      DatasetManifest manifest;
      const Dataset data = data_dir.empty() ? generate_dataset(cfg.data) : load_checked_dataset(data_dir, cfg.data, manifest);
      ModelParams params = ckpt_path.empty()
                               ? init_params(cfg.data.d_obs, cfg.train.model, derive_seed(cfg.train.seed, 1))
                               : load_checkpoint(ckpt_path).params;
      if (params.d_obs != cfg.data.d_obs) throw InvalidInput("checkpoint input width does not match the config");
      std::mt19937_64 rng(seed.value_or(cfg.train.seed));
      const auto batch_data = make_epoch_batches(data, batch, rng).front();
      const auto report = gradcheck(params, batch_data, cfg.train, make_generator(cfg.train), rng());
      for (const auto& g : report.groups) {
        std::printf("%-13s max_rel_err %.3e  worst %s[%ld] analytic %.6e numeric %.6e\n", g.group.c_str(),
                    g.max_rel_error, g.worst_tensor.c_str(), static_cast<long>(g.worst_index), g.analytic,
                    g.numeric);
      }
      std::printf("worst %.3e (threshold %.1e)\n", report.worst(), threshold);
      if (!(report.worst() <= threshold)) return kExitComputation;
    }
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitComputation;
  }
  return 0;
}
