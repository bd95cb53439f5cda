#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nsamc/backbone.hpp"
#include "nsamc/core_types.hpp"
#include "nsamc/spatial.hpp"

namespace nsamc {

enum class Provenance { NSA, MC };

/// Per point, T empirical probability vectors over M classes.
class EmpiricalDistribution {
 public:
  EmpiricalDistribution() = default;
  EmpiricalDistribution(std::size_t points, std::size_t samples, std::size_t classes, Provenance provenance);

  std::size_t num_points() const { return points_; }
  std::size_t num_samples() const { return samples_; }
  std::size_t num_classes() const { return classes_; }
  Provenance provenance() const { return provenance_; }

  double& at(std::size_t i, std::size_t t, std::size_t c) { return data_[(i * samples_ + t) * classes_ + c]; }
  double at(std::size_t i, std::size_t t, std::size_t c) const {
    return data_[(i * samples_ + t) * classes_ + c];
  }
  /// Pointer to the M probabilities of sample t of point i.
  const double* sample(std::size_t i, std::size_t t) const { return data_.data() + (i * samples_ + t) * classes_; }
  double* sample(std::size_t i, std::size_t t) { return data_.data() + (i * samples_ + t) * classes_; }

  const std::vector<double>& data() const { return data_; }

  /// Throws ShapeMismatch when T == 0 and NonFiniteValue / DimensionMismatch
  /// when a sample leaves the simplex (tolerance 1e-6).
  void validate() const;

 private:
  std::size_t points_ = 0;
  std::size_t samples_ = 0;
  std::size_t classes_ = 0;
  Provenance provenance_ = Provenance::NSA;
  std::vector<double> data_;
};

/// samples[i][t] = probs[neighbors[i][t]].
EmpiricalDistribution establish_nsa(const ClassProbabilities& probs, const NeighborIndex& neighbors);

/// samples[i][t] = forward_mc_style(..., t + 1)[i]; runs exactly T passes.
EmpiricalDistribution establish_mc(const nn::ModelParams& params, const BackboneConfig& config,
                                   const PointCloud& cloud, std::size_t samples, std::uint64_t seed);

ClassProbabilities predictive_mean(const EmpiricalDistribution& dist);

/// Binary dump, little-endian: u64 N, u64 T, u64 M, u8 provenance (0 NSA,
/// 1 MC), then N*T*M row-major f64 values.
void write_distribution(const EmpiricalDistribution& dist, std::ostream& out);
EmpiricalDistribution read_distribution(std::istream& in);

}  // namespace nsamc
