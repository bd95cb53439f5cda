#include "nsamc/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "nsamc/csv.hpp"
#include "nsamc/parallel.hpp"

namespace nsamc {

std::string_view to_string(Acquisition acquisition) {
  return acquisition == Acquisition::PE ? "PE" : "STD";
}

Acquisition parse_acquisition(std::string_view text) {
  if (text == "PE" || text == "pe") return Acquisition::PE;
  if (text == "STD" || text == "std") return Acquisition::STD;
  throw Error(ErrorCode::InvalidConfig, "unknown acquisition '" + std::string(text) + "'");
}

namespace {

inline double plogp(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

UncertaintyMap sized_map(std::size_t n, Acquisition acquisition) {
  UncertaintyMap map;
  map.total.resize(n);
  map.aleatoric.resize(n);
  map.epistemic.resize(n);
  map.acquisition = acquisition;
  return map;
}

}  // namespace

UncertaintyMap entropy_decomposition(const EmpiricalDistribution& dist) {
  const auto n = dist.num_points();
  const auto samples = dist.num_samples();
  const auto classes = dist.num_classes();
  auto map = sized_map(n, Acquisition::PE);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    std::vector<double> mean(classes);
    for (std::size_t i = begin; i < end; ++i) {
      std::fill(mean.begin(), mean.end(), 0.0);
      double expected_entropy = 0.0;
      for (std::size_t t = 0; t < samples; ++t) {
        const double* p = dist.sample(i, t);
        double h = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
          mean[c] += p[c];
          h -= plogp(p[c]);
        }
        expected_entropy += h;
      }
      double h_mean = 0.0;
      for (std::size_t c = 0; c < classes; ++c) h_mean -= plogp(mean[c] / static_cast<double>(samples));
      map.total[i] = h_mean;
      map.aleatoric[i] = expected_entropy / static_cast<double>(samples);
      map.epistemic[i] = h_mean - map.aleatoric[i];
    }
  });
  return map;
}

CovarianceSplit std_covariances(const EmpiricalDistribution& dist, std::size_t point) {
  const auto samples = dist.num_samples();
  const auto classes = static_cast<Eigen::Index>(dist.num_classes());
  const double inv_t = 1.0 / static_cast<double>(samples);
  Vector mean = Vector::Zero(classes);
  for (std::size_t t = 0; t < samples; ++t) mean += Eigen::Map<const Vector>(dist.sample(point, t), classes);
  mean *= inv_t;

  CovarianceSplit out{Matrix::Zero(classes, classes), Matrix::Zero(classes, classes), Matrix()};
  for (std::size_t t = 0; t < samples; ++t) {
    const Eigen::Map<const Vector> p(dist.sample(point, t), classes);
    const Vector centered = p - mean;
    out.epistemic.noalias() += centered * centered.transpose();
    out.aleatoric.diagonal() += p;
    out.aleatoric.noalias() -= p * p.transpose();
  }
  out.epistemic *= inv_t;
  out.aleatoric *= inv_t;
  out.total = -(mean * mean.transpose());
  out.total.diagonal() += mean;
  return out;
}

UncertaintyMap std_decomposition(const EmpiricalDistribution& dist) {
  const auto n = dist.num_points();
  const auto samples = dist.num_samples();
  const auto classes = dist.num_classes();
  auto map = sized_map(n, Acquisition::STD);
  const double inv_t = 1.0 / static_cast<double>(samples);
  const double inv_m = 1.0 / static_cast<double>(classes);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    std::vector<double> mean(classes);
    for (std::size_t i = begin; i < end; ++i) {
      std::fill(mean.begin(), mean.end(), 0.0);
      for (std::size_t t = 0; t < samples; ++t) {
        const double* p = dist.sample(i, t);
        for (std::size_t c = 0; c < classes; ++c) mean[c] += p[c];
      }
      for (auto& m : mean) m *= inv_t;
      double epistemic = 0.0;
      double aleatoric = 0.0;
      for (std::size_t t = 0; t < samples; ++t) {
        const double* p = dist.sample(i, t);
        for (std::size_t c = 0; c < classes; ++c) {
          const double d = p[c] - mean[c];
          epistemic += d * d;
          aleatoric += p[c] * (1.0 - p[c]);
        }
      }
      double total = 0.0;
      for (std::size_t c = 0; c < classes; ++c) total += mean[c] * (1.0 - mean[c]);
      map.epistemic[i] = epistemic * inv_t * inv_m;
      map.aleatoric[i] = aleatoric * inv_t * inv_m;
      map.total[i] = total * inv_m;
    }
  });
  return map;
}

double total_variance_identity_check(const EmpiricalDistribution& dist) {
  double worst = 0.0;
  for (std::size_t i = 0; i < dist.num_points(); ++i) {
    const auto split = std_covariances(dist, i);
    worst = std::max(worst, (split.total - split.epistemic - split.aleatoric).cwiseAbs().maxCoeff());
  }
  return worst;
}

void write_uncertainty_csv(const UncertaintyMap& map, std::ostream& out) {
  csv::write_header(out, {"point_index", "total", "aleatoric", "epistemic", "acquisition"});
  const std::string tag(to_string(map.acquisition));
  for (std::size_t i = 0; i < map.size(); ++i) {
    csv::write_row(out, {std::to_string(i), csv::format(map.total[i]), csv::format(map.aleatoric[i]),
                         csv::format(map.epistemic[i]), tag});
  }
}

}  // namespace nsamc
