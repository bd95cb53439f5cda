#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "nsamc/backbone.hpp"
#include "nsamc/core_types.hpp"
#include "nsamc/dataio.hpp"
#include "nsamc/training.hpp"

namespace nsamc {

/// All tunables of one experiment.
struct ExperimentConfig {
  RunConfig run;
  BackboneConfig backbone;
  LossConfig loss;
  SceneSpec scene;
  BlockSpec blocks;
  std::size_t train_scenes = 1;
  std::size_t eval_scenes = 1;

  /// Keeps run.* and backbone.* copies of the dropout settings in sync.
  void sync();
};

/// Applies one "key=value" assignment. Recognized keys: seed, neighbor_count,
/// dropout_rate, alpha, learning_rate, batch_size, epochs, dropout_config,
/// encoder, decoder (comma lists), loss, acquisition, warmup_epochs,
/// scene_seed, scene_points, scene_extent (x,y,z), noise, boundary_band, clutter_boxes,
/// block_edge, block_samples, train_scenes, eval_scenes.
/// Throws InvalidConfig for unknown keys or malformed values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Reads "key=value" lines; '#' starts a comment. Throws ParseError naming
/// the line.
void apply_config_file(ExperimentConfig& config, std::istream& in);
void apply_config_file(ExperimentConfig& config, const std::string& path);

/// Flat key/value view of every setting, in apply_setting syntax.
std::map<std::string, std::string> to_settings(const ExperimentConfig& config);

/// JSON sidecar stored next to a checkpoint.
void write_sidecar(const ExperimentConfig& config, const std::string& path);
ExperimentConfig read_sidecar(const std::string& path);

}  // namespace nsamc
