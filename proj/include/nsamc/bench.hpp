#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nsamc/backbone.hpp"
#include "nsamc/core_types.hpp"
#include "nsamc/uncertainty.hpp"

namespace nsamc {

struct BenchRow {
  Provenance method = Provenance::NSA;
  std::size_t samples = 0;  // T
  std::size_t points = 0;
  double seconds = 0.0;     // median over repeats
  std::uint64_t passes = 0; // forward passes per run
};

struct BenchReport {
  std::vector<BenchRow> rows;

  const BenchRow& find(Provenance method, std::size_t samples) const;
};

/// Wall-clock cost of uncertainty estimation, end to end, for each T.
///   MC : establish_mc (T passes) + decomposition
///   NSA: one stochastic pass + kd-tree + T-NN + establish_nsa + decomposition
/// One warmup run, then the median of `repeats` timed runs. Both methods run
/// under the same global thread budget.
BenchReport bench_uncertainty(const nn::ModelParams& params, const BackboneConfig& config, const PointCloud& cloud,
                              const std::vector<std::size_t>& sample_counts, std::size_t repeats, std::uint64_t seed,
                              Acquisition acquisition = Acquisition::STD);

/// CSV: method,T,points,seconds,passes.
void write_bench_csv(const BenchReport& report, std::ostream& out);

}  // namespace nsamc
