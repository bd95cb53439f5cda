#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "nsamc/core_types.hpp"
#include "nsamc/distribution.hpp"
#include "nsamc/rng.hpp"

namespace nsamc::testing {

inline RngStream test_stream(std::uint64_t seed, std::uint32_t index = 0) {
  return RngStream({seed, index, StreamDomain::kMisc, 77});
}

/// Uniform random coordinates in [0, extent)^3 with `features` columns.
inline PointCloud random_cloud(std::size_t n, std::uint64_t seed, double extent = 1.0, std::size_t features = 0,
                               int classes = 0) {
  auto rng = test_stream(seed);
  PointCloud cloud;
  cloud.coords.resize(static_cast<Eigen::Index>(n), 3);
  cloud.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(features));
  for (Eigen::Index i = 0; i < cloud.coords.rows(); ++i) {
    for (int d = 0; d < 3; ++d) cloud.coords(i, d) = rng.uniform(0.0, extent);
    for (Eigen::Index f = 0; f < cloud.features.cols(); ++f) cloud.features(i, f) = rng.uniform(-1.0, 1.0);
  }
  if (classes > 0) {
    cloud.num_classes = classes;
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    cloud.labels = labels;
  }
  return cloud;
}

/// Random probability vector drawn as normalized exponentials.
inline std::vector<double> random_simplex(RngStream& rng, std::size_t m) {
  std::vector<double> p(m);
  for (auto& v : p) v = -std::log(1.0 - rng.uniform());
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= s;
  return p;
}

inline EmpiricalDistribution random_distribution(std::size_t n, std::size_t t, std::size_t m, RngStream& rng) {
  EmpiricalDistribution dist(n, t, m, Provenance::NSA);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < t; ++s) {
      const auto p = random_simplex(rng, m);
      std::copy(p.begin(), p.end(), dist.sample(i, s));
    }
  }
  return dist;
}

/// Distribution of one point from explicit sample vectors.
inline EmpiricalDistribution single_point(const std::vector<std::vector<double>>& samples) {
  EmpiricalDistribution dist(1, samples.size(), samples.front().size(), Provenance::NSA);
  for (std::size_t t = 0; t < samples.size(); ++t) std::copy(samples[t].begin(), samples[t].end(), dist.sample(0, t));
  return dist;
}

/// O(N^2) neighbor rows: self first, then others by (distance, index).
inline std::vector<std::vector<std::uint32_t>> brute_knn(const Matrix& coords, std::size_t k) {
  const auto n = static_cast<std::size_t>(coords.rows());
  std::vector<std::vector<std::uint32_t>> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::uint32_t>> cand;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = (coords.row(static_cast<Eigen::Index>(i)) - coords.row(static_cast<Eigen::Index>(j))).squaredNorm();
      cand.emplace_back(d, static_cast<std::uint32_t>(j));
    }
    std::sort(cand.begin(), cand.end());
    rows[i].push_back(static_cast<std::uint32_t>(i));
    for (std::size_t c = 0; c + 1 < k; ++c) rows[i].push_back(cand[c].second);
  }
  return rows;
}

}  // namespace nsamc::testing
