#include "nsamc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "nsamc/csv.hpp"

namespace nsamc {

namespace {

/// ceil(percent * count / 100) clamped to [1, count]; the small slack keeps
/// exact products like 30% of 10 from rounding up to 4.
std::size_t prefix_length(double percent, std::size_t count) {
  const double exact = percent * static_cast<double>(count) / 100.0;
  auto k = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  return std::clamp<std::size_t>(k, 1, count);
}

std::vector<std::uint32_t> rank_ascending(const std::vector<double>& values) {
  std::vector<std::uint32_t> order(values.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return values[a] < values[b]; });
  return order;
}

}  // namespace

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < num_classes; ++j) s += at(c, j);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t c) const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < num_classes; ++i) s += at(i, c);
  return s;
}

Matrix ConfusionMatrix::normalized() const {
  const auto m = static_cast<Eigen::Index>(num_classes);
  Matrix out = Matrix::Zero(m, m);
  for (std::size_t i = 0; i < num_classes; ++i) {
    const auto row = row_sum(i);
    if (row == 0) continue;
    for (std::size_t j = 0; j < num_classes; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(at(i, j)) / static_cast<double>(row);
    }
  }
  return out;
}

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& labels,
                          std::size_t num_classes) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                               std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix conf{num_classes, std::vector<std::uint64_t>(num_classes * num_classes, 0)};
  const auto m = static_cast<int>(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= m || predictions[i] < 0 || predictions[i] >= m) {
      throw Error(ErrorCode::LabelOutOfRange, "class id outside [0, M)", i);
    }
    ++conf.counts[static_cast<std::size_t>(labels[i]) * num_classes + static_cast<std::size_t>(predictions[i])];
  }
  return conf;
}

SegmentationScores segmentation_scores(const ConfusionMatrix& conf) {
  const auto total = conf.total();
  if (conf.num_classes == 0 || total == 0) throw Error(ErrorCode::EmptyMatrix, "no evaluated points");
  SegmentationScores s;
  s.class_accuracy.assign(conf.num_classes, 0.0);
  s.class_iou.assign(conf.num_classes, 0.0);
  std::uint64_t trace = 0;
  double acc_sum = 0.0, iou_sum = 0.0;
  std::size_t acc_classes = 0, iou_classes = 0;
  for (std::size_t c = 0; c < conf.num_classes; ++c) {
    const auto hit = conf.at(c, c);
    const auto row = conf.row_sum(c);
    const auto col = conf.col_sum(c);
    trace += hit;
    if (row > 0) {
      s.class_accuracy[c] = static_cast<double>(hit) / static_cast<double>(row);
      acc_sum += s.class_accuracy[c];
      ++acc_classes;
    }
    if (row > 0 || col > 0) {
      s.class_iou[c] = static_cast<double>(hit) / static_cast<double>(row + col - hit);
      iou_sum += s.class_iou[c];
      ++iou_classes;
    }
  }
  s.overall_accuracy = static_cast<double>(trace) / static_cast<double>(total);
  s.mean_accuracy = acc_classes > 0 ? acc_sum / static_cast<double>(acc_classes) : 0.0;
  s.mean_iou = iou_classes > 0 ? iou_sum / static_cast<double>(iou_classes) : 0.0;
  return s;
}

std::vector<double> default_recall_grid() {
  std::vector<double> grid(100);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = static_cast<double>(i + 1);
  return grid;
}

std::vector<PrPoint> pr_curve(const std::vector<int>& correct, const std::vector<double>& uncertainty,
                              const std::vector<double>& recall_grid) {
  if (correct.size() != uncertainty.size()) {
    throw Error(ErrorCode::LengthMismatch, "correctness and uncertainty lengths differ");
  }
  const std::size_t n = correct.size();
  if (n == 0) throw Error(ErrorCode::EmptyInput, "PR curve over zero points");
  for (double r : recall_grid) {
    if (!(r > 0.0 && r <= 100.0)) throw Error(ErrorCode::InvalidConfig, "recall grid values must lie in (0, 100]");
  }
  const auto order = rank_ascending(uncertainty);
  std::vector<std::uint64_t> prefix(n + 1, 0);
  for (std::size_t k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + (correct[order[k]] != 0 ? 1 : 0);

  std::vector<PrPoint> curve;
  curve.reserve(recall_grid.size());
  for (double r : recall_grid) {
    const auto k = prefix_length(r, n);
    curve.push_back({r, static_cast<double>(prefix[k]) / static_cast<double>(k)});
  }
  return curve;
}

RankingSequences ranking_sequences(const VoxelAssignment& voxels, const std::vector<double>& errors,
                                   const std::vector<double>& uncertainty) {
  const std::size_t v = voxels.num_voxels();
  if (v == 0) throw Error(ErrorCode::NoVoxels, "ranking needs at least one voxel");
  if (errors.size() != voxels.voxel_of.size() || uncertainty.size() != voxels.voxel_of.size()) {
    throw Error(ErrorCode::LengthMismatch, "per-point values differ in length from the voxel assignment");
  }
  std::vector<double> error_sum(v, 0.0), unc_sum(v, 0.0);
  std::vector<std::size_t> members(v, 0);
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const auto id = voxels.voxel_of[i];
    error_sum[id] += errors[i];
    unc_sum[id] += uncertainty[i];
    ++members[id];
  }
  for (std::size_t id = 0; id < v; ++id) {
    if (members[id] == 0) continue;
    error_sum[id] /= static_cast<double>(members[id]);
    unc_sum[id] /= static_cast<double>(members[id]);
  }
  return {rank_ascending(error_sum), rank_ascending(unc_sum)};
}

double ranking_iou(const RankingSequences& sequences, double percentile) {
  if (!(percentile > 0.0 && percentile <= 100.0)) {
    throw Error(ErrorCode::InvalidConfig, "percentile threshold must lie in (0, 100]");
  }
  const std::size_t v = sequences.error_ranking.size();
  if (v == 0) throw Error(ErrorCode::NoVoxels, "ranking needs at least one voxel");
  if (sequences.uncertainty_ranking.size() != v) throw Error(ErrorCode::LengthMismatch, "ranking lengths differ");
  const auto k = prefix_length(percentile, v);
  std::vector<char> in_error(v, 0), in_unc(v, 0);
  for (std::size_t i = 0; i < k; ++i) {
    in_error[sequences.error_ranking[i]] = 1;
    in_unc[sequences.uncertainty_ranking[i]] = 1;
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t id = 0; id < v; ++id) {
    inter += (in_error[id] && in_unc[id]) ? 1 : 0;
    uni += (in_error[id] || in_unc[id]) ? 1 : 0;
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double ranking_iou(const VoxelAssignment& voxels, const std::vector<double>& errors,
                   const std::vector<double>& uncertainty, double percentile) {
  return ranking_iou(ranking_sequences(voxels, errors, uncertainty), percentile);
}

std::vector<double> error_indicator(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "prediction/label lengths");
  std::vector<double> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = predictions[i] == labels[i] ? 0.0 : 1.0;
  return out;
}

void write_scores_csv(const SegmentationScores& scores, std::ostream& out) {
  csv::write_header(out, {"metric", "class", "value_percent"});
  csv::write_row(out, {"oAcc", "all", csv::format(100.0 * scores.overall_accuracy)});
  csv::write_row(out, {"mAcc", "all", csv::format(100.0 * scores.mean_accuracy)});
  csv::write_row(out, {"mIoU", "all", csv::format(100.0 * scores.mean_iou)});
  for (std::size_t c = 0; c < scores.class_iou.size(); ++c) {
    csv::write_row(out, {"IoU", std::to_string(c), csv::format(100.0 * scores.class_iou[c])});
  }
  for (std::size_t c = 0; c < scores.class_accuracy.size(); ++c) {
    csv::write_row(out, {"Acc", std::to_string(c), csv::format(100.0 * scores.class_accuracy[c])});
  }
}

void write_confusion_csv(const ConfusionMatrix& conf, std::ostream& out) {
  csv::write_header(out, {"true_class", "predicted_class", "count", "row_normalized"});
  const Matrix norm = conf.normalized();
  for (std::size_t i = 0; i < conf.num_classes; ++i) {
    for (std::size_t j = 0; j < conf.num_classes; ++j) {
      csv::write_row(out, {std::to_string(i), std::to_string(j), std::to_string(conf.at(i, j)),
                           csv::format(norm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))});
    }
  }
}

void write_pr_csv(const std::vector<PrPoint>& curve, std::ostream& out) {
  csv::write_header(out, {"recall_percent", "precision"});
  for (const auto& p : curve) csv::write_row(out, {csv::format(p.recall_percent), csv::format(p.precision)});
}

}  // namespace nsamc
