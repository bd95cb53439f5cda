#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "nsamc/core_types.hpp"

namespace nsamc {

/// Exact 3-D kd-tree over the coordinates of a cloud. Ties in distance are
/// resolved by the smaller point index, so every query is deterministic.
class KdTree {
 public:
  struct Neighbor {
    double dist2;
    std::uint32_t index;
  };

  explicit KdTree(const Matrix& coords, std::size_t leaf_size = 12);

  std::size_t size() const { return points_.size(); }

  /// The `k` nearest points to `query`, ascending by (distance, index).
  /// `exclude` (if < size()) is skipped.
  std::vector<Neighbor> nearest(const std::array<double, 3>& query, std::size_t k,
                                std::size_t exclude = std::numeric_limits<std::size_t>::max()) const;

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const std::array<double, 3>& query, std::size_t k,
              std::size_t exclude, std::vector<Neighbor>& heap) const;

  std::vector<std::array<double, 3>> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

/// Throws EmptyCloud when the cloud has no points.
KdTree build_index(const PointCloud& cloud);

/// N x T neighbor table: row i starts with i itself, followed by its T-1
/// nearest other points.
struct NeighborIndex {
  std::size_t num_points = 0;
  std::size_t width = 0;
  std::vector<std::uint32_t> indices;  // row-major N x T

  std::uint32_t at(std::size_t row, std::size_t col) const { return indices[row * width + col]; }
  const std::uint32_t* row(std::size_t i) const { return indices.data() + i * width; }
};

/// Throws TooFewPoints when T > N and InvalidConfig when T < 1.
NeighborIndex knn(const KdTree& index, const PointCloud& cloud, std::size_t neighbor_count);

using VoxelCell = std::array<std::int64_t, 3>;

struct VoxelAssignment {
  double voxel_size = 1.0;
  std::vector<std::uint32_t> voxel_of;  // per point
  std::vector<VoxelCell> cells;         // voxel id -> lattice cell, lexicographically sorted

  std::size_t num_voxels() const { return cells.size(); }
};

/// Origin-anchored grid: point i lands in floor(coords[i] / voxel_size).
/// Throws NonPositiveVoxelSize.
VoxelAssignment voxelize(const PointCloud& cloud, double voxel_size);

}  // namespace nsamc
