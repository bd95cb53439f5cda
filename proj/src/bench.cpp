#include "nsamc/bench.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>

#include "nsamc/csv.hpp"
#include "nsamc/distribution.hpp"
#include "nsamc/spatial.hpp"
#include "nsamc/training.hpp"

namespace nsamc {

const BenchRow& BenchReport::find(Provenance method, std::size_t samples) const {
  for (const auto& row : rows) {
    if (row.method == method && row.samples == samples) return row;
  }
  throw Error(ErrorCode::InvalidConfig, "no bench row for T=" + std::to_string(samples));
}

namespace {

// Keeps the optimizer from discarding a result.
volatile double g_sink = 0.0;

void decompose(const EmpiricalDistribution& dist, Acquisition acquisition) {
  const auto map = acquisition == Acquisition::PE ? entropy_decomposition(dist) : std_decomposition(dist);
  g_sink = g_sink + (map.total.empty() ? 0.0 : map.total.front());
}

template <typename Run>
BenchRow time_method(Provenance method, std::size_t samples, std::size_t points, std::size_t repeats, Run&& run) {
  run();  // warmup
  std::vector<double> seconds;
  BenchRow row{method, samples, points, 0.0, 0};
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto before = forward_pass_count();
    const auto start = std::chrono::steady_clock::now();
    run();
    const auto stop = std::chrono::steady_clock::now();
    row.passes = forward_pass_count() - before;
    seconds.push_back(std::chrono::duration<double>(stop - start).count());
  }
  row.seconds = median(seconds);
  return row;
}

}  // namespace

BenchReport bench_uncertainty(const nn::ModelParams& params, const BackboneConfig& config, const PointCloud& cloud,
                              const std::vector<std::size_t>& sample_counts, std::size_t repeats, std::uint64_t seed,
                              Acquisition acquisition) {
  if (repeats < 1) throw Error(ErrorCode::InvalidConfig, "bench needs at least one repeat");
  BenchReport report;
  for (auto t : sample_counts) {
    report.rows.push_back(time_method(Provenance::MC, t, cloud.size(), repeats, [&] {
      decompose(establish_mc(params, config, cloud, t, seed), acquisition);
    }));
    report.rows.push_back(time_method(Provenance::NSA, t, cloud.size(), repeats, [&] {
      const auto probs = forward_stochastic(params, config, cloud, seed, 1);
      const auto neighbors = knn(build_index(cloud), cloud, t);
      decompose(establish_nsa(probs, neighbors), acquisition);
    }));
  }
  return report;
}

void write_bench_csv(const BenchReport& report, std::ostream& out) {
  csv::write_header(out, {"method", "T", "points", "seconds", "passes"});
  for (const auto& row : report.rows) {
    csv::write_row(out, {row.method == Provenance::NSA ? "NSA" : "MC", std::to_string(row.samples),
                         std::to_string(row.points), csv::format(row.seconds), std::to_string(row.passes)});
  }
}

}  // namespace nsamc
