#include "nsamc/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "nsamc/csv.hpp"
#include "nsamc/distribution.hpp"
#include "nsamc/rng.hpp"

namespace nsamc {

std::string_view to_string(LossKind kind) { return kind == LossKind::CE ? "CE" : "UGCE"; }

LossKind parse_loss_kind(std::string_view text) {
  if (text == "CE" || text == "ce") return LossKind::CE;
  if (text == "UGCE" || text == "ugce") return LossKind::UGCE;
  throw Error(ErrorCode::InvalidConfig, "unknown loss '" + std::string(text) + "'");
}

void LossConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::InvalidConfig, "alpha must be finite and >= 0");
  if (warmup_epochs < 0) throw Error(ErrorCode::InvalidConfig, "warmup epochs must be >= 0");
}

namespace {

constexpr double kMinProbability = 1e-300;

const std::vector<int>& require_labels(const ClassProbabilities& probs, const std::optional<std::vector<int>>& labels) {
  if (!labels) throw Error(ErrorCode::MissingLabels, "loss needs labels");
  if (labels->size() != probs.size()) throw Error(ErrorCode::LengthMismatch, "labels and probabilities differ in length");
  const auto m = static_cast<int>(probs.num_classes());
  for (std::size_t i = 0; i < labels->size(); ++i) {
    if ((*labels)[i] < 0 || (*labels)[i] >= m) throw Error(ErrorCode::LabelOutOfRange, "label outside [0, M)", i);
  }
  return *labels;
}

LossResult weighted_ce(const ClassProbabilities& probs, const std::vector<int>& labels, std::vector<double> weights) {
  const std::size_t n = probs.size();
  LossResult out;
  out.grad_logits = probs.probs;
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const auto c = static_cast<Eigen::Index>(labels[i]);
    total += weights[i] * -std::log(std::max(probs.probs(r, c), kMinProbability));
    out.grad_logits(r, c) -= 1.0;
    out.grad_logits.row(r) *= weights[i] * inv_n;
  }
  out.loss = total * inv_n;
  out.weights = std::move(weights);
  return out;
}

}  // namespace

LossResult ce_loss(const ClassProbabilities& probs, const std::optional<std::vector<int>>& labels) {
  const auto& l = require_labels(probs, labels);
  return weighted_ce(probs, l, std::vector<double>(probs.size(), 1.0));
}

LossResult ugce_loss(const ClassProbabilities& probs, const std::optional<std::vector<int>>& labels,
                     const std::vector<double>& aleatoric, double alpha) {
  const auto& l = require_labels(probs, labels);
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::InvalidConfig, "alpha must be finite and >= 0");
  if (aleatoric.size() != probs.size()) throw Error(ErrorCode::LengthMismatch, "one Ua value per point required");
  std::vector<double> weights(probs.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    // Rounding can leave a true zero slightly negative.
    if (!(aleatoric[i] >= -1e-12)) throw Error(ErrorCode::NegativeUncertainty, "Ua must be >= 0", i);
    weights[i] = 1.0 / (1.0 + alpha * std::max(aleatoric[i], 0.0));
  }
  return weighted_ce(probs, l, std::move(weights));
}

// ---------------------------------------------------------------------------

EvalSet EvalSet::make(std::vector<PointCloud> blocks, std::vector<std::vector<int>> labels, std::size_t neighbor_count) {
  if (blocks.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "one label vector per block required");
  EvalSet set;
  set.neighbors.reserve(blocks.size());
  for (const auto& b : blocks) set.neighbors.push_back(knn(build_index(b), b, neighbor_count));
  set.blocks = std::move(blocks);
  set.labels = std::move(labels);
  return set;
}

ClassProbabilities predict_nsa(const nn::ModelParams& params, const BackboneConfig& config, const PointCloud& cloud,
                               const NeighborIndex& neighbors, std::uint64_t seed) {
  const auto probs = config.dropout_spec().any() ? forward_stochastic(params, config, cloud, seed, 1)
                                                 : forward_deterministic(params, config, cloud);
  return predictive_mean(establish_nsa(probs, neighbors));
}

SegmentationScores evaluate(const nn::ModelParams& params, const BackboneConfig& config, const EvalSet& set,
                            std::uint64_t seed) {
  std::vector<int> predictions, labels;
  for (std::size_t b = 0; b < set.blocks.size(); ++b) {
    const auto pred = predict_nsa(params, config, set.blocks[b], set.neighbors[b], seed).argmax();
    predictions.insert(predictions.end(), pred.begin(), pred.end());
    labels.insert(labels.end(), set.labels[b].begin(), set.labels[b].end());
  }
  return segmentation_scores(confusion(predictions, labels, config.num_classes()));
}

TrainingState TrainingState::fresh(const BackboneConfig& config, std::size_t input_dim, std::uint64_t seed) {
  TrainingState state;
  state.params = init_backbone(config, input_dim, seed);
  state.adam = nn::AdamState::for_params(state.params);
  return state;
}

EpochStats train_epoch(TrainingState& state, const std::vector<PointCloud>& blocks, const BackboneConfig& backbone,
                       const RunConfig& run, const LossConfig& loss) {
  run.validate();
  loss.validate();
  if (blocks.empty()) throw Error(ErrorCode::EmptyInput, "training needs at least one block");
  const auto started = std::chrono::steady_clock::now();
  ++state.epoch;

  const bool weighted = loss.kind == LossKind::UGCE && state.epoch > loss.warmup_epochs;
  if (weighted && state.neighbor_cache.size() != blocks.size()) {
    state.neighbor_cache.clear();
    for (const auto& b : blocks) {
      state.neighbor_cache.push_back(knn(build_index(b), b, static_cast<std::size_t>(run.neighbor_count)));
    }
  }

  std::vector<std::size_t> order(blocks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream shuffle({run.seed, static_cast<std::uint32_t>(state.epoch), StreamDomain::kShuffle, 0});
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.below(i))]);
  }

  const auto batch = static_cast<std::size_t>(run.batch_size);
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += batch) {
    const std::size_t stop = std::min(order.size(), start + batch);
    nn::GradientSet grads = nn::GradientSet::zeros_like(state.params);
    for (std::size_t k = start; k < stop; ++k) {
      const auto b = order[k];
      const PointCloud& block = blocks[b];
      const StochasticPass pass{run.seed, ++state.block_counter, {}};
      nn::Tape tape;
      const auto logits_id = forward_recorded(state.params, backbone, backbone_input(block), &pass, tape);
      const auto probs = nn::softmax_rows(tape.value(logits_id));

      LossResult result;
      if (weighted) {
        const auto dist = establish_nsa(probs, state.neighbor_cache[b]);
        const auto map = loss.acquisition == Acquisition::STD ? std_decomposition(dist) : entropy_decomposition(dist);
        result = ugce_loss(probs, block.labels, map.aleatoric, loss.alpha);
      } else {
        result = ce_loss(probs, block.labels);
      }
      loss_sum += result.loss;
      grads += nn::backward(state.params, tape, logits_id, result.grad_logits);
    }
    grads *= 1.0 / static_cast<double>(stop - start);
    nn::adam_step(state.params, grads, state.adam, run.learning_rate);
  }

  EpochStats stats;
  stats.epoch = state.epoch;
  stats.loss = loss_sum / static_cast<double>(blocks.size());
  stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return stats;
}

TrainReport train(const std::vector<PointCloud>& blocks, const BackboneConfig& backbone, const RunConfig& run,
                  const LossConfig& loss, const EvalSet& validation) {
  if (blocks.empty()) throw Error(ErrorCode::EmptyInput, "training needs at least one block");
  const auto started = std::chrono::steady_clock::now();
  const auto input_dim = 3 + blocks.front().feature_dim();
  auto state = TrainingState::fresh(backbone, input_dim, run.seed);
  TrainReport report;
  for (int e = 0; e < run.epochs; ++e) {
    auto stats = train_epoch(state, blocks, backbone, run, loss);
    if (!validation.empty()) {
      const auto scores = evaluate(state.params, backbone, validation, run.seed);
      stats.miou = scores.mean_iou;
      stats.macc = scores.mean_accuracy;
      stats.oacc = scores.overall_accuracy;
    }
    report.epochs.push_back(stats);
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  report.params = std::move(state.params);
  return report;
}

void write_train_report_csv(const TrainReport& report, std::ostream& out) {
  csv::write_header(out, {"epoch", "loss", "miou", "macc", "oacc", "seconds"});
  for (const auto& e : report.epochs) {
    csv::write_row(out, {std::to_string(e.epoch), csv::format(e.loss), csv::format(100.0 * e.miou),
                         csv::format(100.0 * e.macc), csv::format(100.0 * e.oacc), csv::format(e.seconds)});
  }
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "median of nothing");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<AlphaSweepRow> alpha_sweep(const std::vector<PointCloud>& blocks, const EvalSet& validation,
                                       const std::vector<double>& alphas, const std::vector<std::uint64_t>& seeds,
                                       const BackboneConfig& backbone, const RunConfig& run, const LossConfig& loss) {
  if (alphas.empty()) throw Error(ErrorCode::InvalidConfig, "alpha list must not be empty");
  if (seeds.empty()) throw Error(ErrorCode::InvalidConfig, "seed list must not be empty");
  std::vector<AlphaSweepRow> rows;
  for (double alpha : alphas) {
    AlphaSweepRow row;
    row.alpha = alpha;
    for (auto seed : seeds) {
      RunConfig r = run;
      r.seed = seed;
      r.alpha = alpha;
      LossConfig l = loss;
      l.kind = LossKind::UGCE;
      l.alpha = alpha;
      const auto report = train(blocks, backbone, r, l, {});
      row.miou.push_back(100.0 * evaluate(report.params, backbone, validation, seed).mean_iou);
    }
    row.median_miou = median(row.miou);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_alpha_sweep_csv(const std::vector<AlphaSweepRow>& rows, std::ostream& out) {
  csv::write_header(out, {"alpha", "seeds", "median_miou", "miou_per_seed"});
  for (const auto& row : rows) {
    std::string per_seed;
    for (std::size_t i = 0; i < row.miou.size(); ++i) {
      if (i > 0) per_seed += ';';
      per_seed += csv::format(row.miou[i]);
    }
    csv::write_row(out, {csv::format(row.alpha), std::to_string(row.miou.size()), csv::format(row.median_miou),
                         per_seed});
  }
}

}  // namespace nsamc
