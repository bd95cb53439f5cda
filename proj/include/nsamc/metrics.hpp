#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "nsamc/core_types.hpp"
#include "nsamc/spatial.hpp"

namespace nsamc {

/// Rows are the true class, columns the predicted class.
struct ConfusionMatrix {
  std::size_t num_classes = 0;
  std::vector<std::uint64_t> counts;  // row-major M x M

  std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return counts[truth * num_classes + predicted];
  }
  std::uint64_t total() const;
  std::uint64_t row_sum(std::size_t c) const;
  std::uint64_t col_sum(std::size_t c) const;
  /// Row-stochastic view; empty rows stay zero.
  Matrix normalized() const;
};

/// Throws LengthMismatch, or LabelOutOfRange for ids outside [0, M).
ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& labels,
                          std::size_t num_classes);

/// All values are fractions in [0, 1].
struct SegmentationScores {
  double overall_accuracy = 0.0;
  double mean_accuracy = 0.0;
  double mean_iou = 0.0;
  std::vector<double> class_accuracy;
  std::vector<double> class_iou;
};

/// mIoU averages classes present in truth or prediction; mAcc averages
/// classes present in truth. Throws EmptyMatrix when nothing was counted.
SegmentationScores segmentation_scores(const ConfusionMatrix& conf);

struct PrPoint {
  double recall_percent;
  double precision;
};

/// 1, 2, ..., 100.
std::vector<double> default_recall_grid();

/// Precision over the ceil(r N / 100) least-uncertain points for each recall
/// r, ties broken by point index. Throws LengthMismatch.
std::vector<PrPoint> pr_curve(const std::vector<int>& correct, const std::vector<double>& uncertainty,
                              const std::vector<double>& recall_grid = default_recall_grid());

struct RankingSequences {
  std::vector<std::uint32_t> error_ranking;        // voxel ids, ascending mean error
  std::vector<std::uint32_t> uncertainty_ranking;  // voxel ids, ascending mean uncertainty
};

/// Per-voxel means of the per-point values, each ranked ascending with ties
/// broken by voxel id. Throws NoVoxels or LengthMismatch.
RankingSequences ranking_sequences(const VoxelAssignment& voxels, const std::vector<double>& errors,
                                   const std::vector<double>& uncertainty);

/// |E(P_t) & U(P_t)| / |E(P_t) | U(P_t)| over the first ceil(P_t V / 100)
/// voxels of each ranking. Throws InvalidConfig unless 0 < P_t <= 100.
double ranking_iou(const RankingSequences& sequences, double percentile);
double ranking_iou(const VoxelAssignment& voxels, const std::vector<double>& errors,
                   const std::vector<double>& uncertainty, double percentile);

/// 0/1 misclassification indicator per point.
std::vector<double> error_indicator(const std::vector<int>& predictions, const std::vector<int>& labels);

void write_scores_csv(const SegmentationScores& scores, std::ostream& out);
void write_confusion_csv(const ConfusionMatrix& conf, std::ostream& out);
void write_pr_csv(const std::vector<PrPoint>& curve, std::ostream& out);

}  // namespace nsamc
