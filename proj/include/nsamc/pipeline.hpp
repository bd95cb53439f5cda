#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nsamc/backbone.hpp"
#include "nsamc/config.hpp"
#include "nsamc/core_types.hpp"
#include "nsamc/dataio.hpp"
#include "nsamc/distribution.hpp"
#include "nsamc/training.hpp"
#include "nsamc/uncertainty.hpp"

namespace nsamc {

/// Whole-cloud prediction assembled from per-block inference.
struct CloudPrediction {
  ClassProbabilities mean;  // predictive mean per source point
  std::vector<int> predicted;
  UncertaintyMap entropy;   // PE
  UncertaintyMap variance;  // STD

  const UncertaintyMap& map(Acquisition acquisition) const {
    return acquisition == Acquisition::PE ? entropy : variance;
  }
};

/// Partitions `cloud` into `block_edge` cells, establishes each block's
/// predictive distribution with NSA (one pass, T-NN within the block) or MC
/// (T passes), and scatters the results back to source order. Blocks with
/// fewer than T points use all of their points as neighbors.
CloudPrediction predict_cloud(const nn::ModelParams& params, const BackboneConfig& config, const PointCloud& cloud,
                              double block_edge, std::size_t samples, std::uint64_t seed, Provenance method);

/// Synthetic data for one experiment. Training scene i uses seed
/// scene.seed + i; held-out scene j uses scene.seed + 1000 + j. Validation
/// blocks are scored against the clean labels.
struct ExperimentData {
  std::vector<GeneratedScene> train_scenes;
  std::vector<GeneratedScene> eval_scenes;
  std::vector<PointCloud> train_blocks;
  EvalSet validation;
};

ExperimentData make_experiment_data(const ExperimentConfig& config);

}  // namespace nsamc
