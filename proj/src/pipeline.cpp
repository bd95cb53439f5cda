#include "nsamc/pipeline.hpp"

#include <algorithm>

#include "nsamc/dataio.hpp"
#include "nsamc/spatial.hpp"

namespace nsamc {

namespace {

void scatter(UncertaintyMap& dst, const UncertaintyMap& src, const std::vector<std::uint32_t>& rows) {
  dst.acquisition = src.acquisition;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    dst.total[rows[k]] = src.total[k];
    dst.aleatoric[rows[k]] = src.aleatoric[k];
    dst.epistemic[rows[k]] = src.epistemic[k];
  }
}

UncertaintyMap empty_map(std::size_t n) {
  UncertaintyMap map;
  map.total.assign(n, 0.0);
  map.aleatoric.assign(n, 0.0);
  map.epistemic.assign(n, 0.0);
  return map;
}

}  // namespace

CloudPrediction predict_cloud(const nn::ModelParams& params, const BackboneConfig& config, const PointCloud& cloud,
                              double block_edge, std::size_t samples, std::uint64_t seed, Provenance method) {
  const std::size_t n = cloud.size();
  const auto m = static_cast<Eigen::Index>(config.num_classes());
  CloudPrediction out;
  out.mean.probs = Matrix::Zero(static_cast<Eigen::Index>(n), m);
  out.entropy = empty_map(n);
  out.variance = empty_map(n);

  for (const auto& block : partition_blocks(cloud, block_edge)) {
    EmpiricalDistribution dist;
    if (method == Provenance::NSA) {
      const auto probs = forward_stochastic(params, config, block.cloud, seed, 1);
      const auto width = std::min(samples, block.cloud.size());
      dist = establish_nsa(probs, knn(build_index(block.cloud), block.cloud, width));
    } else {
      dist = establish_mc(params, config, block.cloud, samples, seed);
    }
    const auto mean = predictive_mean(dist);
    for (std::size_t k = 0; k < block.source_index.size(); ++k) {
      out.mean.probs.row(block.source_index[k]) = mean.probs.row(static_cast<Eigen::Index>(k));
    }
    scatter(out.entropy, entropy_decomposition(dist), block.source_index);
    scatter(out.variance, std_decomposition(dist), block.source_index);
  }
  out.predicted = out.mean.argmax();
  return out;
}

ExperimentData make_experiment_data(const ExperimentConfig& config) {
  ExperimentData data;
  auto spec = config.scene;
  for (std::size_t i = 0; i < config.train_scenes; ++i) {
    spec.seed = config.scene.seed + i;
    data.train_scenes.push_back(generate_scene(spec));
    for (auto& block : split_blocks(data.train_scenes.back().cloud, config.blocks, spec.seed)) {
      data.train_blocks.push_back(std::move(block.cloud));
    }
  }
  std::vector<PointCloud> blocks;
  std::vector<std::vector<int>> labels;
  for (std::size_t j = 0; j < config.eval_scenes; ++j) {
    spec.seed = config.scene.seed + 1000 + j;
    data.eval_scenes.push_back(generate_scene(spec));
    const auto& scene = data.eval_scenes.back();
    for (auto& block : split_blocks(scene.cloud, config.blocks, spec.seed)) {
      labels.push_back(gather_labels(block, scene.clean_labels));
      blocks.push_back(std::move(block.cloud));
    }
  }
  data.validation = EvalSet::make(std::move(blocks), std::move(labels),
                                  static_cast<std::size_t>(config.run.neighbor_count));
  return data;
}

}  // namespace nsamc
