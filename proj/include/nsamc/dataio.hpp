#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nsamc/core_types.hpp"

namespace nsamc {

/// Semantic classes of the synthetic room.
enum SceneClass : int { kFloor = 0, kWall = 1, kDoor = 2, kWindow = 3, kClutter = 4 };
inline constexpr int kSceneClassCount = 5;

/// Synthetic indoor room: a floor, four walls carrying one door and one
/// window, and a few clutter boxes standing on the floor. The layout is
/// drawn from `seed`.
struct SceneSpec {
  std::uint64_t seed = 0;
  std::array<double, 3> extent = {4.0, 2.0, 2.5};  // bounding box in meters; walls stand 0.1 m inside
  std::size_t points = 20000;
  double boundary_noise_rate = 0.0;  // probability of flipping a band point
  double boundary_band = 0.05;       // meters
  std::size_t clutter_boxes = 2;
  double jitter_sigma = 0.01;        // meters
  double door_recess = 0.03;         // door plane offset behind the wall, meters
  double window_recess = 0.05;

  /// Throws InvalidConfig.
  void validate() const;
};

struct GeneratedScene {
  PointCloud cloud;                 // labels carry the injected noise
  std::vector<int> clean_labels;
  std::vector<std::uint8_t> in_band;  // 1 when within boundary_band of an inter-class edge
  std::vector<std::uint8_t> flipped;  // 1 when the label was flipped
};

GeneratedScene generate_scene(const SceneSpec& spec);

struct BlockSpec {
  double edge = 1.0;           // meters
  std::size_t samples = 4096;  // points per block

  void validate() const;
};

/// One fixed-size training block. The cloud's features are the source
/// features followed by coordinates relative to the block center
/// (cell center in x/y, 0 in z).
struct Block {
  PointCloud cloud;
  std::vector<std::uint32_t> source_index;  // row in the source cloud
  std::array<std::int64_t, 2> cell{};
};

/// XY grid of `edge`-sized cells anchored at the origin; each non-empty cell
/// yields one block of exactly `samples` points, drawn without replacement
/// when the cell is large enough and with replacement otherwise.
std::vector<Block> split_blocks(const PointCloud& cloud, const BlockSpec& spec, std::uint64_t seed);

/// Same cells as split_blocks but every point is kept exactly once (no
/// resampling); used to score or annotate a whole cloud.
std::vector<Block> partition_blocks(const PointCloud& cloud, double edge);

/// Gathers `values[source_index[k]]` for every row of a block.
std::vector<int> gather_labels(const Block& block, const std::vector<int>& values);

/// Text format: header "pcs 1 N F M", then one line per point
/// "x y z f1 ... fF label" (label -1 for unlabeled clouds).
void write_cloud(const PointCloud& cloud, std::ostream& out);
void write_cloud(const PointCloud& cloud, const std::string& path);
/// Throws ParseError naming the 1-based line, or IoError.
PointCloud read_cloud(std::istream& in);
PointCloud read_cloud(const std::string& path);

/// Clean-label sidecar: header "pcs-clean 1 N", then one label per line.
void write_labels(const std::vector<int>& labels, const std::string& path);
std::vector<int> read_labels(const std::string& path);

}  // namespace nsamc
