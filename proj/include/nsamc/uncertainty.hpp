#pragma once

#include <cstddef>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "nsamc/core_types.hpp"
#include "nsamc/distribution.hpp"

namespace nsamc {

enum class Acquisition { PE, STD };

std::string_view to_string(Acquisition acquisition);
Acquisition parse_acquisition(std::string_view text);

/// Per-point total / aleatoric / epistemic uncertainty from one acquisition
/// function. Entropies are in nats; STD values are probability variances.
struct UncertaintyMap {
  std::vector<double> total;
  std::vector<double> aleatoric;
  std::vector<double> epistemic;
  Acquisition acquisition = Acquisition::PE;

  std::size_t size() const { return total.size(); }
};

/// H = entropy of the mean sample, Ha = mean per-sample entropy,
/// He = H - Ha. 0 log 0 is taken as 0.
UncertaintyMap entropy_decomposition(const EmpiricalDistribution& dist);

/// Covariance split of one point's samples:
///   epistemic = 1/T sum_t (p_t - mean)(p_t - mean)^T
///   aleatoric = 1/T sum_t [diag(p_t) - p_t p_t^T]
///   total     = diag(mean) - mean mean^T
struct CovarianceSplit {
  Matrix epistemic;
  Matrix aleatoric;
  Matrix total;
};

CovarianceSplit std_covariances(const EmpiricalDistribution& dist, std::size_t point);

/// Scalarizes each covariance by the mean of its diagonal, so U = Ua + Ue
/// survives the reduction.
UncertaintyMap std_decomposition(const EmpiricalDistribution& dist);

/// Max over points and class pairs of |total - (epistemic + aleatoric)|.
double total_variance_identity_check(const EmpiricalDistribution& dist);

/// CSV: point_index,total,aleatoric,epistemic,acquisition.
void write_uncertainty_csv(const UncertaintyMap& map, std::ostream& out);

}  // namespace nsamc
