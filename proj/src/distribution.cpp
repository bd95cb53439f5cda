#include "nsamc/distribution.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "nsamc/parallel.hpp"

namespace nsamc {

EmpiricalDistribution::EmpiricalDistribution(std::size_t points, std::size_t samples, std::size_t classes,
                                             Provenance provenance)
    : points_(points), samples_(samples), classes_(classes), provenance_(provenance),
      data_(points * samples * classes, 0.0) {}

void EmpiricalDistribution::validate() const {
  if (samples_ == 0) throw Error(ErrorCode::ShapeMismatch, "distribution needs T >= 1");
  for (std::size_t i = 0; i < points_; ++i) {
    for (std::size_t t = 0; t < samples_; ++t) {
      const double* p = sample(i, t);
      double sum = 0.0;
      for (std::size_t c = 0; c < classes_; ++c) {
        if (!std::isfinite(p[c])) throw Error(ErrorCode::NonFiniteValue, "non-finite probability", i);
        if (p[c] < 0.0 || p[c] > 1.0) throw Error(ErrorCode::DimensionMismatch, "probability outside [0,1]", i);
        sum += p[c];
      }
      if (std::abs(sum - 1.0) > 1e-6) throw Error(ErrorCode::DimensionMismatch, "sample off the simplex", i);
    }
  }
}

EmpiricalDistribution establish_nsa(const ClassProbabilities& probs, const NeighborIndex& neighbors) {
  const std::size_t n = probs.size();
  if (neighbors.num_points != n) {
    throw Error(ErrorCode::ShapeMismatch, "neighbor table has " + std::to_string(neighbors.num_points) +
                                              " rows, probabilities " + std::to_string(n));
  }
  const std::size_t samples = neighbors.width;
  const std::size_t classes = probs.num_classes();
  for (std::size_t k = 0; k < neighbors.indices.size(); ++k) {
    if (neighbors.indices[k] >= n) {
      throw Error(ErrorCode::ShapeMismatch, "neighbor index out of range", k / std::max<std::size_t>(1, samples));
    }
  }
  EmpiricalDistribution dist(n, samples, classes, Provenance::NSA);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto* row = neighbors.row(i);
      for (std::size_t t = 0; t < samples; ++t) {
        const double* src = probs.probs.data() + static_cast<std::size_t>(row[t]) * classes;
        std::memcpy(dist.sample(i, t), src, classes * sizeof(double));
      }
    }
  });
  return dist;
}

EmpiricalDistribution establish_mc(const nn::ModelParams& params, const BackboneConfig& config,
                                   const PointCloud& cloud, std::size_t samples, std::uint64_t seed) {
  if (samples < 1) throw Error(ErrorCode::InvalidConfig, "MC dropout needs T >= 1");
  if (!config.dropout_spec().any()) {
    throw Error(ErrorCode::NoDropoutLayers, "MC dropout needs a flagged dropout layer");
  }
  const std::size_t n = cloud.size();
  const std::size_t classes = config.num_classes();
  EmpiricalDistribution dist(n, samples, classes, Provenance::MC);
  for (std::size_t t = 0; t < samples; ++t) {
    const auto pass = forward_mc_style(params, config, cloud, seed, static_cast<std::uint32_t>(t + 1));
    for (std::size_t i = 0; i < n; ++i) {
      std::memcpy(dist.sample(i, t), pass.probs.data() + i * classes, classes * sizeof(double));
    }
  }
  return dist;
}

ClassProbabilities predictive_mean(const EmpiricalDistribution& dist) {
  const auto n = dist.num_points();
  const auto samples = dist.num_samples();
  const auto classes = dist.num_classes();
  ClassProbabilities out{Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(classes))};
  if (samples == 0) return out;
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.probs.data() + i * classes;
    for (std::size_t t = 0; t < samples; ++t) {
      const double* p = dist.sample(i, t);
      for (std::size_t c = 0; c < classes; ++c) row[c] += p[c];
    }
    for (std::size_t c = 0; c < classes; ++c) row[c] /= static_cast<double>(samples);
  }
  return out;
}

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<unsigned char, 8> bytes{};
  for (int b = 0; b < 8; ++b) bytes[static_cast<std::size_t>(b)] = static_cast<unsigned char>(v >> (8 * b));
  out.write(reinterpret_cast<const char*>(bytes.data()), 8);
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), 8)) throw Error(ErrorCode::ParseError, "truncated tensor");
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | bytes[static_cast<std::size_t>(b)];
  return v;
}

}  // namespace

void write_distribution(const EmpiricalDistribution& dist, std::ostream& out) {
  put_u64(out, dist.num_points());
  put_u64(out, dist.num_samples());
  put_u64(out, dist.num_classes());
  const char tag = dist.provenance() == Provenance::NSA ? 0 : 1;
  out.put(tag);
  for (double d : dist.data()) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    put_u64(out, bits);
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing distribution");
}

EmpiricalDistribution read_distribution(std::istream& in) {
  const auto n = get_u64(in);
  const auto t = get_u64(in);
  const auto m = get_u64(in);
  const int tag = in.get();
  if (tag != 0 && tag != 1) throw Error(ErrorCode::ParseError, "bad provenance tag");
  EmpiricalDistribution dist(n, t, m, tag == 0 ? Provenance::NSA : Provenance::MC);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < t; ++s) {
      double* p = dist.sample(i, s);
      for (std::size_t c = 0; c < m; ++c) {
        const auto bits = get_u64(in);
        std::memcpy(&p[c], &bits, sizeof bits);
      }
    }
  }
  return dist;
}

}  // namespace nsamc
