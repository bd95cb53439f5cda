#include "nsamc/cli.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nsamc/bench.hpp"
#include "nsamc/config.hpp"
#include "nsamc/csv.hpp"
#include "nsamc/dataio.hpp"
#include "nsamc/metrics.hpp"
#include "nsamc/parallel.hpp"
#include "nsamc/pipeline.hpp"
#include "nsamc/spatial.hpp"
#include "nsamc/training.hpp"

namespace nsamc {

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string config_path;
  std::vector<std::string> settings;
  std::string output;
};

void add_common(CLI::App* cmd, Common& c, bool output_required = true) {
  cmd->add_option("--seed", c.seed, "Seed");
  cmd->add_option("--config", c.config_path, "key=value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.settings, "Override one setting, key=value");
  auto* o = cmd->add_option("-o,--output", c.output, "Output path");
  if (output_required) o->required();
}

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig config;
  if (!c.config_path.empty()) apply_config_file(config, c.config_path);
  for (const auto& s : c.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--set expects key=value, got '" + s + "'");
    apply_setting(config, s.substr(0, eq), s.substr(eq + 1));
  }
  if (c.seed) config.run.seed = *c.seed;
  config.sync();
  config.run.validate();
  config.backbone.validate();
  config.loss.validate();
  return config;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  return out;
}

struct Model {
  ExperimentConfig config;
  nn::ModelParams params;
};

Model load_model(const std::string& path) {
  Model m{read_sidecar(path + ".json"), nn::load_params(path)};
  m.config.sync();
  return m;
}

std::vector<int> scoring_labels(const PointCloud& cloud, const std::string& labels_path) {
  if (!labels_path.empty()) return read_labels(labels_path);
  if (!cloud.labels) throw Error(ErrorCode::MissingLabels, "cloud has no labels and no --labels file was given");
  return *cloud.labels;
}

std::vector<int> correctness(const std::vector<int>& predicted, const std::vector<int>& labels) {
  std::vector<int> out(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) out[i] = predicted[i] == labels[i] ? 1 : 0;
  return out;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neighborhood spatial aggregation MC dropout for point cloud segmentation"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = hardware concurrency)")->check(CLI::NonNegativeNumber);

  Common common;

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic room scene");
  add_common(gen, common);
  std::optional<std::size_t> gen_points;
  std::optional<double> gen_noise;
  gen->add_option("--points", gen_points, "Point count");
  gen->add_option("--noise", gen_noise, "Boundary label flip rate");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model; writes checkpoint, <out>.json and a report CSV");
  add_common(train_cmd, common);
  std::string report_path;
  train_cmd->add_option("--report", report_path, "Training report CSV (default <out>.train.csv)");

  // eval / uq
  std::string model_path, cloud_path, labels_path, method_name = "NSA", acquisition_name = "STD";
  std::optional<std::size_t> samples;
  std::string confusion_path, pr_path, ranking_path;
  double voxel_size = 0.45;
  auto add_inference = [&](CLI::App* cmd) {
    add_common(cmd, common);
    cmd->add_option("--model", model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
    cmd->add_option("--cloud", cloud_path, "Point cloud (pcs)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--labels", labels_path, "Labels to score against (default: the cloud's own)");
    cmd->add_option("--method", method_name, "NSA or MC")->check(CLI::IsMember({"NSA", "MC"}));
    cmd->add_option("--samples", samples, "T (default: the model's neighbor_count)")->check(CLI::PositiveNumber);
  };
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a cloud");
  add_inference(eval_cmd);
  eval_cmd->add_option("--confusion", confusion_path, "Confusion matrix CSV");
  auto* uq_cmd = app.add_subcommand("uq", "Per-point uncertainty, PR curve and Ranking IoU");
  add_inference(uq_cmd);
  uq_cmd->add_option("--acquisition", acquisition_name, "PE or STD")->check(CLI::IsMember({"PE", "STD"}));
  uq_cmd->add_option("--pr", pr_path, "PR-curve CSV");
  uq_cmd->add_option("--ranking", ranking_path, "Ranking IoU CSV");
  uq_cmd->add_option("--voxel", voxel_size, "Voxel edge for Ranking IoU (m)")->check(CLI::PositiveNumber);

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Time NSA against MC dropout");
  add_common(bench_cmd, common);
  std::string bench_model;
  std::size_t bench_points = 16384;
  std::vector<std::size_t> bench_t = {5, 10};
  std::size_t repeats = 5;
  bench_cmd->add_option("--model", bench_model, "Checkpoint (default: random weights)")->check(CLI::ExistingFile);
  bench_cmd->add_option("--points", bench_points, "Scene point count")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--samples", bench_t, "T values")->delimiter(',');
  bench_cmd->add_option("--repeats", repeats, "Timed repeats per cell")->check(CLI::PositiveNumber);

  // sweeps
  auto* alpha_cmd = app.add_subcommand("sweep-alpha", "UGCE alpha sweep");
  add_common(alpha_cmd, common);
  std::vector<double> alphas = {0.0, 0.3, 0.5, 1.0, 2.0};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  alpha_cmd->add_option("--alphas", alphas, "Alpha values")->delimiter(',');
  alpha_cmd->add_option("--seeds", seeds, "Model seeds")->delimiter(',');
  auto* t_cmd = app.add_subcommand("sweep-T", "Neighbor count and dropout layout sweep");
  add_common(t_cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    set_thread_count(threads);
    auto config = load_config(common);

    if (gen->parsed()) {
      auto spec = config.scene;
      if (common.seed) spec.seed = *common.seed;
      if (gen_points) spec.points = *gen_points;
      if (gen_noise) spec.boundary_noise_rate = *gen_noise;
      const auto scene = generate_scene(spec);
      write_cloud(scene.cloud, common.output);
      write_labels(scene.clean_labels, common.output + ".clean");
      out << "wrote " << scene.cloud.size() << " points to " << common.output << '\n';
    } else if (train_cmd->parsed()) {
      const auto data = make_experiment_data(config);
      const auto report = train(data.train_blocks, config.backbone, config.run, config.loss, data.validation);
      nn::save_params(report.params, common.output);
      write_sidecar(config, common.output + ".json");
      auto csv_out = open_out(report_path.empty() ? common.output + ".train.csv" : report_path);
      write_train_report_csv(report, csv_out);
      if (!report.epochs.empty()) out << "final mIoU " << report.epochs.back().miou << '\n';
    } else if (eval_cmd->parsed() || uq_cmd->parsed()) {
      const auto model = load_model(model_path);
      const auto cloud = read_cloud(cloud_path);
      check_backbone_params(model.params, model.config.backbone, 3 + cloud.feature_dim() + 3);
      const auto labels = scoring_labels(cloud, labels_path);
      if (labels.size() != cloud.size()) throw Error(ErrorCode::LengthMismatch, "label count differs from cloud size");
      const std::size_t t = samples ? *samples : static_cast<std::size_t>(model.config.run.neighbor_count);
      const auto method = method_name == "MC" ? Provenance::MC : Provenance::NSA;
      const std::uint64_t seed = common.seed ? *common.seed : model.config.run.seed;
      const auto pred = predict_cloud(model.params, model.config.backbone, cloud, model.config.blocks.edge, t, seed, method);
      const auto conf = confusion(pred.predicted, labels, model.config.backbone.num_classes());
      if (eval_cmd->parsed()) {
        auto csv_out = open_out(common.output);
        write_scores_csv(segmentation_scores(conf), csv_out);
        if (!confusion_path.empty()) {
          auto c_out = open_out(confusion_path);
          write_confusion_csv(conf, c_out);
        }
      } else {
        const auto& map = pred.map(parse_acquisition(acquisition_name));
        auto csv_out = open_out(common.output);
        write_uncertainty_csv(map, csv_out);
        if (!pr_path.empty()) {
          auto pr_out = open_out(pr_path);
          write_pr_csv(pr_curve(correctness(pred.predicted, labels), map.total), pr_out);
        }
        if (!ranking_path.empty()) {
          const auto voxels = voxelize(cloud, voxel_size);
          const auto seq = ranking_sequences(voxels, error_indicator(pred.predicted, labels), map.total);
          auto r_out = open_out(ranking_path);
          csv::write_header(r_out, {"P_t", "ranking_iou", "voxels"});
          for (double p : {10.0, 30.0, 50.0, 70.0}) {
            csv::write_row(r_out, {csv::format(p), csv::format(ranking_iou(seq, p)),
                                   std::to_string(voxels.cells.size())});
          }
        }
      }
    } else if (bench_cmd->parsed()) {
      auto spec = config.scene;
      spec.points = bench_points;
      // One block spanning the whole room, features as in training blocks.
      auto cloud = generate_scene(spec).cloud;
      const Eigen::RowVector3d center(spec.extent[0] / 2, spec.extent[1] / 2, 0.0);
      Matrix features(cloud.features.rows(), cloud.features.cols() + 3);
      features << cloud.features, cloud.coords.rowwise() - center;
      cloud.features = std::move(features);
      ExperimentConfig mc = config;
      nn::ModelParams params;
      if (bench_model.empty()) {
        params = init_backbone(config.backbone, 3 + cloud.feature_dim(), config.run.seed);
      } else {
        auto model = load_model(bench_model);
        mc = model.config;
        params = std::move(model.params);
      }
      const auto report = bench_uncertainty(params, mc.backbone, cloud, bench_t, repeats, config.run.seed,
                                            config.loss.acquisition);
      auto csv_out = open_out(common.output);
      write_bench_csv(report, csv_out);
    } else if (alpha_cmd->parsed()) {
      const auto data = make_experiment_data(config);
      const auto rows = alpha_sweep(data.train_blocks, data.validation, alphas, seeds, config.backbone, config.run,
                                    config.loss);
      auto csv_out = open_out(common.output);
      write_alpha_sweep_csv(rows, csv_out);
    } else if (t_cmd->parsed()) {
      auto csv_out = open_out(common.output);
      csv::write_header(csv_out, {"dropout_config", "T", "miou", "macc", "oacc"});
      struct Cell {
        DropoutConfig layout;
        int t;
      };
      const std::vector<Cell> grid = {{DropoutConfig::Con1, 5},  {DropoutConfig::Con1, 10}, {DropoutConfig::Con1, 15},
                                      {DropoutConfig::Con1, 20}, {DropoutConfig::Con2, 10}, {DropoutConfig::Con3, 10}};
      for (const auto& cell : grid) {
        auto c = config;
        c.run.dropout_config = cell.layout;
        c.run.neighbor_count = cell.t;
        c.sync();
        const auto data = make_experiment_data(c);
        const auto report = train(data.train_blocks, c.backbone, c.run, c.loss, data.validation);
        const auto& last = report.epochs.back();
        csv::write_row(csv_out, {std::string(to_string(cell.layout)), std::to_string(cell.t), csv::format(100.0 * last.miou),
                                 csv::format(100.0 * last.macc), csv::format(100.0 * last.oacc)});
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace nsamc
