#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "nsamc/parallel.hpp"
#include "nsamc/spatial.hpp"
#include "support.hpp"

using namespace nsamc;

namespace {

PointCloud from_rows(const std::vector<std::array<double, 3>>& rows) {
  PointCloud c;
  c.coords.resize(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int d = 0; d < 3; ++d) c.coords(static_cast<Eigen::Index>(i), d) = rows[i][static_cast<std::size_t>(d)];
  }
  c.features.resize(c.coords.rows(), 0);
  return c;
}

std::vector<std::uint32_t> row_of(const NeighborIndex& nb, std::size_t i) {
  return {nb.row(i), nb.row(i) + nb.width};
}

}  // namespace

TEST_CASE("single point is its own only neighbor") {
  const auto c = from_rows({{1, 2, 3}});
  const auto nb = knn(build_index(c), c, 1);
  CHECK(nb.num_points == 1);
  CHECK(nb.at(0, 0) == 0);
}

TEST_CASE("empty cloud is rejected") {
  PointCloud c;
  c.coords.resize(0, 3);
  try {
    build_index(c);
    FAIL("expected EmptyCloud");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyCloud);
  }
}

TEST_CASE("unit square corners: nearest other corner is adjacent") {
  const auto c = from_rows({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}});
  const auto tree = build_index(c);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& p = c.coords.row(static_cast<Eigen::Index>(i));
    const auto hit = tree.nearest({p(0), p(1), p(2)}, 1, i);
    REQUIRE(hit.size() == 1);
    // Adjacent corners sit at distance 1, the diagonal at sqrt(2).
    const auto j = hit[0].index;
    CHECK((c.coords.row(static_cast<Eigen::Index>(j)) - p).norm() == doctest::Approx(1.0));
    // Two adjacent corners tie; the smaller index wins.
    const std::size_t a = (i + 1) % 4, b = (i + 3) % 4;
    CHECK(j == std::min(a, b));
  }
}

TEST_CASE("kd-tree queries agree with a brute-force scan") {
  const auto c = testing::random_cloud(1000, 11, 5.0);
  const auto tree = build_index(c);
  auto rng = testing::test_stream(12);
  for (int q = 0; q < 50; ++q) {
    const std::array<double, 3> query = {rng.uniform(-1, 6), rng.uniform(-1, 6), rng.uniform(-1, 6)};
    const std::size_t k = 1 + rng.below(20);
    std::vector<std::pair<double, std::uint32_t>> all;
    for (Eigen::Index i = 0; i < c.coords.rows(); ++i) {
      double d = 0;
      for (int a = 0; a < 3; ++a) d += std::pow(c.coords(i, a) - query[static_cast<std::size_t>(a)], 2);
      all.emplace_back(d, static_cast<std::uint32_t>(i));
    }
    std::sort(all.begin(), all.end());
    const auto hits = tree.nearest(query, k);
    REQUIRE(hits.size() == k);
    for (std::size_t r = 0; r < k; ++r) CHECK(hits[r].index == all[r].second);
  }
}

TEST_CASE("knn with T=1 lists only self") {
  const auto c = testing::random_cloud(64, 3);
  const auto nb = knn(build_index(c), c, 1);
  for (std::size_t i = 0; i < 64; ++i) CHECK(nb.at(i, 0) == i);
}

TEST_CASE("collinear points at x=0,1,3 with T=2") {
  const auto c = from_rows({{0, 0, 0}, {1, 0, 0}, {3, 0, 0}});
  const auto nb = knn(build_index(c), c, 2);
  CHECK(row_of(nb, 0) == std::vector<std::uint32_t>{0, 1});
  CHECK(row_of(nb, 1) == std::vector<std::uint32_t>{1, 0});
  CHECK(row_of(nb, 2) == std::vector<std::uint32_t>{2, 1});
}

TEST_CASE("knn with T=N gives permutations") {
  const auto c = testing::random_cloud(30, 4);
  const auto nb = knn(build_index(c), c, 30);
  for (std::size_t i = 0; i < 30; ++i) {
    auto row = row_of(nb, i);
    CHECK(row[0] == i);
    std::sort(row.begin(), row.end());
    for (std::uint32_t j = 0; j < 30; ++j) CHECK(row[j] == j);
  }
}

TEST_CASE("knn argument errors") {
  const auto c = testing::random_cloud(5, 4);
  const auto tree = build_index(c);
  try {
    knn(tree, c, 6);
    FAIL("expected TooFewPoints");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewPoints);
  }
  CHECK_THROWS_AS(knn(tree, c, 0), Error);
}

TEST_CASE("knn equals the brute-force oracle on random clouds") {
  auto rng = testing::test_stream(99);
  for (std::uint64_t trial = 0; trial < 25; ++trial) {
    const std::size_t n = 1 + rng.below(500);
    const std::size_t t = 1 + rng.below(std::min<std::size_t>(n, 16));
    // Coarse lattice coordinates force many distance ties.
    auto c = testing::random_cloud(n, 1000 + trial, 2.0);
    if (trial % 2 == 0) c.coords = (c.coords * 4).array().floor() / 4;
    const auto nb = knn(build_index(c), c, t);
    const auto oracle = testing::brute_knn(c.coords, t);
    for (std::size_t i = 0; i < n; ++i) REQUIRE(row_of(nb, i) == oracle[i]);
  }
}

TEST_CASE("neighbor rows are distinct and non-decreasing in distance") {
  const auto c = testing::random_cloud(300, 8);
  const auto nb = knn(build_index(c), c, 12);
  for (std::size_t i = 0; i < 300; ++i) {
    const auto row = row_of(nb, i);
    CHECK(std::set<std::uint32_t>(row.begin(), row.end()).size() == row.size());
    double last = 0.0;
    for (std::size_t k = 1; k < row.size(); ++k) {
      const double d = (c.coords.row(row[k]) - c.coords.row(static_cast<Eigen::Index>(i))).norm();
      CHECK(d >= last);
      last = d;
    }
  }
}

TEST_CASE("knn is permutation-equivariant") {
  const auto c = testing::random_cloud(200, 21);
  auto rng = testing::test_stream(22);
  std::vector<std::uint32_t> perm(200);
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);
  PointCloud p = c;
  for (std::size_t k = 0; k < 200; ++k) p.coords.row(static_cast<Eigen::Index>(k)) = c.coords.row(perm[k]);
  const auto a = knn(build_index(c), c, 8);
  const auto b = knn(build_index(p), p, 8);
  // Continuous coordinates: no ties, so the neighbor sets map exactly.
  for (std::size_t k = 0; k < 200; ++k) {
    for (std::size_t t = 0; t < 8; ++t) CHECK(perm[b.at(k, t)] == a.at(perm[k], t));
  }
}

TEST_CASE("knn result does not depend on the thread count") {
  const auto c = testing::random_cloud(2000, 5);
  set_thread_count(1);
  const auto a = knn(build_index(c), c, 10);
  set_thread_count(4);
  const auto b = knn(build_index(c), c, 10);
  set_thread_count(1);
  CHECK(a.indices == b.indices);
}

TEST_CASE("voxelize examples") {
  SUBCASE("one cell") {
    const auto c = from_rows({{0.1, 0.2, 0.3}, {0.9, 0.5, 0.1}, {0.4, 0.4, 0.99}});
    const auto v = voxelize(c, 1.0);
    CHECK(v.num_voxels() == 1);
    CHECK(v.voxel_of == std::vector<std::uint32_t>{0, 0, 0});
  }
  SUBCASE("two cells") {
    const auto c = from_rows({{0.1, 0.1, 0.1}, {1.5, 0.1, 0.1}});
    const auto v = voxelize(c, 1.0);
    CHECK(v.num_voxels() == 2);
    CHECK(v.voxel_of[0] != v.voxel_of[1]);
  }
  SUBCASE("non-positive size") {
    const auto c = from_rows({{0, 0, 0}});
    try {
      voxelize(c, 0.0);
      FAIL("expected NonPositiveVoxelSize");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonPositiveVoxelSize);
    }
    CHECK_THROWS_AS(voxelize(c, -1.0), Error);
  }
}

TEST_CASE("voxel cells equal floor division and every voxel is occupied") {
  const auto c = testing::random_cloud(1000, 31, 5.0);
  const auto v = voxelize(c, 1.0);
  std::vector<int> members(v.num_voxels(), 0);
  for (Eigen::Index i = 0; i < c.coords.rows(); ++i) {
    const auto& cell = v.cells[v.voxel_of[static_cast<std::size_t>(i)]];
    for (int d = 0; d < 3; ++d) CHECK(cell[static_cast<std::size_t>(d)] == std::floor(c.coords(i, d)));
    ++members[v.voxel_of[static_cast<std::size_t>(i)]];
  }
  for (int m : members) CHECK(m >= 1);
  CHECK(std::is_sorted(v.cells.begin(), v.cells.end()));
}

TEST_CASE("voxel partition survives translation by whole voxels") {
  const auto c = testing::random_cloud(500, 41, 3.0);
  const double size = 0.5;
  auto shifted = c;
  shifted.coords.col(0).array() += 3 * size;
  shifted.coords.col(1).array() -= 7 * size;
  const auto a = voxelize(c, size);
  const auto b = voxelize(shifted, size);
  REQUIRE(a.num_voxels() == b.num_voxels());
  // Same grouping: points share a voxel in one iff they share it in the other.
  std::map<std::uint32_t, std::uint32_t> map;
  for (std::size_t i = 0; i < a.voxel_of.size(); ++i) {
    const auto it = map.emplace(a.voxel_of[i], b.voxel_of[i]).first;
    CHECK(it->second == b.voxel_of[i]);
  }
  CHECK(map.size() == a.num_voxels());
}
