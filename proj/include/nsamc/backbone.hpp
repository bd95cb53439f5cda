#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nsamc/core_types.hpp"
#include "nsamc/nn.hpp"

namespace nsamc {

/// PointNet-lite segmentation network.
///
/// Per-point encoder MLP -> max-pool over points -> the first encoder
/// feature of each point concatenated with the global feature -> decoder
/// MLP ending in `num_classes` logits. Dropout only ever follows decoder
/// hidden layers, so the global feature is identical for every sampled model.
struct BackboneConfig {
  std::vector<std::size_t> encoder = {64, 128, 256};
  std::vector<std::size_t> decoder = {512, 256, 256, 128, 5};
  DropoutConfig dropout_config = DropoutConfig::Con1;
  double dropout_rate = 0.5;

  static BackboneConfig for_classes(std::size_t num_classes);

  std::size_t num_classes() const { return decoder.empty() ? 0 : decoder.back(); }
  std::size_t hidden_decoder_layers() const { return decoder.empty() ? 0 : decoder.size() - 1; }
  /// Per decoder hidden layer: Con_1 flags all, Con_2 the first and third,
  /// Con_3 the second only.
  nn::DropoutSpec dropout_spec() const;
  /// Throws InvalidConfig.
  void validate() const;
};

/// Network input rows: [coords | features].
Matrix backbone_input(const PointCloud& cloud);

nn::ModelParams init_backbone(const BackboneConfig& config, std::size_t input_dim, std::uint64_t seed);

/// Throws ShapeMismatch when params do not realize config for `input_dim`.
void check_backbone_params(const nn::ModelParams& params, const BackboneConfig& config,
                           std::size_t input_dim);

/// Mask source for one stochastic pass; point i uses stream
/// (seed, point_ids[i] or i, decoder layer, sample_index).
struct StochasticPass {
  std::uint64_t seed = 0;
  std::uint32_t sample_index = 1;
  std::vector<std::uint32_t> point_ids;
};

ClassProbabilities forward_deterministic(const nn::ModelParams& params, const BackboneConfig& config,
                                         const PointCloud& cloud);

/// Single stochastic pass with space-dependent masks. Throws NoDropoutLayers.
ClassProbabilities forward_stochastic(const nn::ModelParams& params, const BackboneConfig& config,
                                      const PointCloud& cloud, std::uint64_t seed,
                                      std::uint32_t sample_index,
                                      const std::vector<std::uint32_t>& point_ids = {});

/// Pass `t` of classic MC dropout: same keying as forward_stochastic with
/// sample_index = t.
ClassProbabilities forward_mc_style(const nn::ModelParams& params, const BackboneConfig& config,
                                    const PointCloud& cloud, std::uint64_t seed, std::uint32_t t);

/// Records the forward pass on `tape` and returns the id of the logits.
/// `pass == nullptr` runs without dropout.
nn::Tape::ValueId forward_recorded(const nn::ModelParams& params, const BackboneConfig& config,
                                   const Matrix& input, const StochasticPass* pass, nn::Tape& tape);

/// Logits without recording.
Matrix forward_logits(const nn::ModelParams& params, const BackboneConfig& config, const Matrix& input,
                      const StochasticPass* pass);

/// Number of full network passes executed by this process (instrumentation).
std::uint64_t forward_pass_count();
void reset_forward_pass_count();

}  // namespace nsamc
