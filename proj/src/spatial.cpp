#include "nsamc/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nsamc/parallel.hpp"

namespace nsamc {

namespace {

bool closer(const KdTree::Neighbor& a, const KdTree::Neighbor& b) {
  return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
}

}  // namespace

KdTree::KdTree(const Matrix& coords, std::size_t leaf_size) : leaf_size_(std::max<std::size_t>(1, leaf_size)) {
  const auto n = static_cast<std::size_t>(coords.rows());
  points_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    points_[i] = {coords(r, 0), coords(r, 1), coords(r, 2)};
  }
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0u);
  if (n > 0) {
    nodes_.reserve(2 * n / leaf_size_ + 1);
    build(0, static_cast<std::uint32_t>(n));
  }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= leaf_size_) return id;

  std::array<double, 3> lo{}, hi{};
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (auto i = begin; i < end; ++i) {
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(lo[d], points_[order_[i]][d]);
      hi[d] = std::max(hi[d], points_[order_[i]][d]);
    }
  }
  int axis = 0;
  for (int d = 1; d < 3; ++d) {
    if (hi[d] - lo[d] > hi[axis] - lo[axis]) axis = d;
  }
  if (hi[axis] == lo[axis]) return id;  // all coincident: keep as a leaf

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return points_[a][axis] < points_[b][axis] ||
                            (points_[a][axis] == points_[b][axis] && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(std::int32_t node_id, const std::array<double, 3>& query, std::size_t k,
                    std::size_t exclude, std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.axis < 0) {
    for (auto i = node.begin; i < node.end; ++i) {
      const auto idx = order_[i];
      if (idx == exclude) continue;
      const auto& p = points_[idx];
      const double dx = p[0] - query[0], dy = p[1] - query[1], dz = p[2] - query[2];
      const Neighbor cand{dx * dx + dy * dy + dz * dz, idx};
      if (heap.size() < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), closer);
      } else if (closer(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), closer);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), closer);
      }
    }
    return;
  }
  const double diff = query[static_cast<std::size_t>(node.axis)] - node.split;
  const auto near = diff < 0.0 ? node.left : node.right;
  const auto far = diff < 0.0 ? node.right : node.left;
  search(near, query, k, exclude, heap);
  // Points equal to the split value can sit on either side, so an
  // equal-distance plane is still visited.
  if (heap.size() < k || diff * diff <= heap.front().dist2) {
    search(far, query, k, exclude, heap);
  }
}

std::vector<KdTree::Neighbor> KdTree::nearest(const std::array<double, 3>& query, std::size_t k,
                                              std::size_t exclude) const {
  std::vector<Neighbor> heap;
  if (k == 0 || nodes_.empty()) return heap;
  heap.reserve(k + 1);
  search(0, query, k, exclude, heap);
  std::sort_heap(heap.begin(), heap.end(), closer);
  return heap;
}

KdTree build_index(const PointCloud& cloud) {
  if (cloud.size() == 0) throw Error(ErrorCode::EmptyCloud, "cannot index an empty cloud");
  return KdTree(cloud.coords);
}

NeighborIndex knn(const KdTree& index, const PointCloud& cloud, std::size_t neighbor_count) {
  const std::size_t n = cloud.size();
  if (neighbor_count < 1) throw Error(ErrorCode::InvalidConfig, "neighbor count must be >= 1");
  if (neighbor_count > n) {
    throw Error(ErrorCode::TooFewPoints,
                "requested " + std::to_string(neighbor_count) + " neighbors from " +
                    std::to_string(n) + " points");
  }
  if (index.size() != n) throw Error(ErrorCode::ShapeMismatch, "index was built for another cloud");

  NeighborIndex out;
  out.num_points = n;
  out.width = neighbor_count;
  out.indices.resize(n * neighbor_count);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const std::array<double, 3> q{cloud.coords(r, 0), cloud.coords(r, 1), cloud.coords(r, 2)};
      auto* row = out.indices.data() + i * neighbor_count;
      row[0] = static_cast<std::uint32_t>(i);
      const auto found = index.nearest(q, neighbor_count - 1, i);
      for (std::size_t t = 0; t < found.size(); ++t) row[t + 1] = found[t].index;
    }
  });
  return out;
}

VoxelAssignment voxelize(const PointCloud& cloud, double voxel_size) {
  if (!(voxel_size > 0.0)) throw Error(ErrorCode::NonPositiveVoxelSize, "voxel size must be > 0");
  const std::size_t n = cloud.size();
  std::vector<VoxelCell> point_cells(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d) {
      point_cells[i][static_cast<std::size_t>(d)] = static_cast<std::int64_t>(
          std::floor(cloud.coords(static_cast<Eigen::Index>(i), d) / voxel_size));
    }
  }
  VoxelAssignment out;
  out.voxel_size = voxel_size;
  out.cells = point_cells;
  std::sort(out.cells.begin(), out.cells.end());
  out.cells.erase(std::unique(out.cells.begin(), out.cells.end()), out.cells.end());
  out.voxel_of.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = std::lower_bound(out.cells.begin(), out.cells.end(), point_cells[i]);
    out.voxel_of[i] = static_cast<std::uint32_t>(it - out.cells.begin());
  }
  return out;
}

}  // namespace nsamc
