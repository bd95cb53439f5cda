#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "nsamc/backbone.hpp"
#include "nsamc/core_types.hpp"
#include "nsamc/metrics.hpp"
#include "nsamc/nn.hpp"
#include "nsamc/spatial.hpp"
#include "nsamc/uncertainty.hpp"

namespace nsamc {

enum class LossKind { CE, UGCE };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view text);

struct LossConfig {
  LossKind kind = LossKind::UGCE;
  double alpha = 0.5;
  Acquisition acquisition = Acquisition::STD;
  /// Epochs at the start of training during which UGCE weights stay at 1.
  int warmup_epochs = 1;

  void validate() const;
};

struct LossResult {
  double loss = 0.0;
  Matrix grad_logits;            // dL/dlogits, N x M
  std::vector<double> weights;   // per-point loss weight
};

/// Mean negative log-likelihood of the labels; gradient is (p - onehot) / N.
/// Throws MissingLabels or LabelOutOfRange.
LossResult ce_loss(const ClassProbabilities& probs, const std::optional<std::vector<int>>& labels);

/// Cross-entropy with per-point weight 1 / (1 + alpha * Ua). Ua is a constant
/// of the loss. Throws MissingLabels or NegativeUncertainty.
LossResult ugce_loss(const ClassProbabilities& probs, const std::optional<std::vector<int>>& labels,
                     const std::vector<double>& aleatoric, double alpha);

/// Blocks used for validation: per block, the labels to score against and a
/// cached neighbor table.
struct EvalSet {
  std::vector<PointCloud> blocks;
  std::vector<std::vector<int>> labels;
  std::vector<NeighborIndex> neighbors;

  /// Builds neighbor tables for every block.
  static EvalSet make(std::vector<PointCloud> blocks, std::vector<std::vector<int>> labels,
                      std::size_t neighbor_count);
  bool empty() const { return blocks.empty(); }
};

/// Single stochastic pass (sample_index 1) + neighborhood aggregation; returns
/// the NSA predictive mean.
ClassProbabilities predict_nsa(const nn::ModelParams& params, const BackboneConfig& config,
                               const PointCloud& cloud, const NeighborIndex& neighbors, std::uint64_t seed);

/// Segmentation scores of NSA predictions over every block of `set`.
SegmentationScores evaluate(const nn::ModelParams& params, const BackboneConfig& config, const EvalSet& set,
                            std::uint64_t seed);

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double miou = 0.0;
  double macc = 0.0;
  double oacc = 0.0;
  double seconds = 0.0;
};

/// Everything that persists across epochs.
struct TrainingState {
  nn::ModelParams params;
  nn::AdamState adam;
  std::uint32_t block_counter = 0;
  int epoch = 0;
  std::vector<NeighborIndex> neighbor_cache;

  static TrainingState fresh(const BackboneConfig& config, std::size_t input_dim, std::uint64_t seed);
};

/// One pass over `blocks` in a seeded shuffled order. Per block: one
/// stochastic forward (sample_index = running block counter), NSA on the
/// block's cached neighbor table, the loss on that same pass, backward;
/// `batch_size` blocks are averaged per Adam step.
EpochStats train_epoch(TrainingState& state, const std::vector<PointCloud>& blocks, const BackboneConfig& backbone,
                       const RunConfig& run, const LossConfig& loss);

struct TrainReport {
  std::vector<EpochStats> epochs;
  double seconds = 0.0;
  nn::ModelParams params;
};

/// Fresh parameters, `run.epochs` epochs; validation scores per epoch when
/// `validation` is non-empty.
TrainReport train(const std::vector<PointCloud>& blocks, const BackboneConfig& backbone, const RunConfig& run,
                  const LossConfig& loss, const EvalSet& validation);

/// CSV: epoch,loss,miou,macc,oacc,seconds (scores in percent).
void write_train_report_csv(const TrainReport& report, std::ostream& out);

struct AlphaSweepRow {
  double alpha = 0.0;
  std::vector<double> miou;  // per seed, percent
  double median_miou = 0.0;
};

/// One UGCE model per (alpha, seed); the median mIoU over seeds per alpha.
std::vector<AlphaSweepRow> alpha_sweep(const std::vector<PointCloud>& blocks, const EvalSet& validation,
                                       const std::vector<double>& alphas, const std::vector<std::uint64_t>& seeds,
                                       const BackboneConfig& backbone, const RunConfig& run, const LossConfig& loss);

void write_alpha_sweep_csv(const std::vector<AlphaSweepRow>& rows, std::ostream& out);

double median(std::vector<double> values);

}  // namespace nsamc
