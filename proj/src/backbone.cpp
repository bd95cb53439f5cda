#include "nsamc/backbone.hpp"

#include <algorithm>
#include <atomic>
#include <utility>
#include <vector>

#include "nsamc/parallel.hpp"
#include "nsamc/rng.hpp"

namespace nsamc {

namespace {

std::atomic<std::uint64_t> g_passes{0};

constexpr Eigen::Index kChunkRows = 2048;

Matrix dropout_mask_for(const BackboneConfig& config, const StochasticPass& pass, std::size_t layer,
                        Eigen::Index rows, Eigen::Index cols) {
  return nn::dropout_mask(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols),
                          config.dropout_rate,
                          {pass.seed, static_cast<std::uint32_t>(layer), pass.sample_index}, pass.point_ids);
}

}  // namespace

BackboneConfig BackboneConfig::for_classes(std::size_t num_classes) {
  BackboneConfig config;
  config.decoder.back() = num_classes;
  return config;
}

nn::DropoutSpec BackboneConfig::dropout_spec() const {
  nn::DropoutSpec spec;
  spec.rate = dropout_rate;
  spec.after_layer.assign(hidden_decoder_layers(), false);
  for (std::size_t i = 0; i < spec.after_layer.size(); ++i) {
    switch (dropout_config) {
      case DropoutConfig::Con1: spec.after_layer[i] = true; break;
      case DropoutConfig::Con2: spec.after_layer[i] = (i == 0 || i == 2); break;
      case DropoutConfig::Con3: spec.after_layer[i] = (i == 1); break;
    }
  }
  return spec;
}

void BackboneConfig::validate() const {
  if (encoder.empty()) throw Error(ErrorCode::InvalidConfig, "encoder needs at least one layer");
  if (decoder.empty()) throw Error(ErrorCode::InvalidConfig, "decoder needs at least the output layer");
  for (auto s : encoder) {
    if (s == 0) throw Error(ErrorCode::InvalidConfig, "zero-width encoder layer");
  }
  for (auto s : decoder) {
    if (s == 0) throw Error(ErrorCode::InvalidConfig, "zero-width decoder layer");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "dropout rate must lie in [0, 1)");
  }
}

Matrix backbone_input(const PointCloud& cloud) {
  Matrix input(cloud.coords.rows(), 3 + cloud.features.cols());
  input.leftCols(3) = cloud.coords;
  if (cloud.features.cols() > 0) input.rightCols(cloud.features.cols()) = cloud.features;
  return input;
}

nn::ModelParams init_backbone(const BackboneConfig& config, std::size_t input_dim, std::uint64_t seed) {
  config.validate();
  RngStream stream({seed, 0, StreamDomain::kInit, 0});
  nn::ModelParams params;
  std::size_t width = input_dim;
  for (auto size : config.encoder) {
    params.layers.push_back(nn::init_dense(width, size, stream));
    width = size;
  }
  width = config.encoder.front() + config.encoder.back();
  for (auto size : config.decoder) {
    params.layers.push_back(nn::init_dense(width, size, stream));
    width = size;
  }
  return params;
}

void check_backbone_params(const nn::ModelParams& params, const BackboneConfig& config,
                           std::size_t input_dim) {
  const std::size_t expected_layers = config.encoder.size() + config.decoder.size();
  if (params.layers.size() != expected_layers) {
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(expected_layers) + " layers, got " +
                                              std::to_string(params.layers.size()));
  }
  std::size_t width = input_dim;
  std::size_t l = 0;
  auto expect = [&](std::size_t in, std::size_t out) {
    const auto& layer = params.layers[l];
    if (layer.in_dim() != in || layer.out_dim() != out || static_cast<std::size_t>(layer.bias.size()) != out) {
      throw Error(ErrorCode::ShapeMismatch, "layer shape differs from backbone config", l);
    }
    ++l;
  };
  for (auto size : config.encoder) {
    expect(width, size);
    width = size;
  }
  width = config.encoder.front() + config.encoder.back();
  for (auto size : config.decoder) {
    expect(width, size);
    width = size;
  }
}

nn::Tape::ValueId forward_recorded(const nn::ModelParams& params, const BackboneConfig& config,
                                   const Matrix& input, const StochasticPass* pass, nn::Tape& tape) {
  check_backbone_params(params, config, static_cast<std::size_t>(input.cols()));
  if (input.rows() == 0) throw Error(ErrorCode::EmptyInput, "forward pass over zero points");
  const auto spec = config.dropout_spec();
  const std::size_t enc = config.encoder.size();

  auto x = tape.input(input);
  nn::Tape::ValueId first_local = x;
  for (std::size_t l = 0; l < enc; ++l) {
    x = tape.dense(params, l, x, true);
    if (l == 0) first_local = x;
  }
  const auto global = tape.maxpool(x);
  x = tape.concat_broadcast(first_local, global);
  for (std::size_t d = 0; d < config.decoder.size(); ++d) {
    const bool hidden = d + 1 < config.decoder.size();
    x = tape.dense(params, enc + d, x, hidden);
    if (hidden && pass != nullptr && spec.after_layer[d] && config.dropout_rate > 0.0) {
      const Matrix& v = tape.value(x);
      x = tape.dropout(x, dropout_mask_for(config, *pass, d, v.rows(), v.cols()));
    }
  }
  ++g_passes;
  return x;
}

Matrix forward_logits(const nn::ModelParams& params, const BackboneConfig& config, const Matrix& input,
                      const StochasticPass* pass) {
  check_backbone_params(params, config, static_cast<std::size_t>(input.cols()));
  if (input.rows() == 0) throw Error(ErrorCode::EmptyInput, "forward pass over zero points");
  const auto spec = config.dropout_spec();
  const std::size_t enc = config.encoder.size();
  const Eigen::Index n = input.rows();
  if (pass != nullptr && !pass->point_ids.empty() && pass->point_ids.size() != static_cast<std::size_t>(n)) {
    throw Error(ErrorCode::ShapeMismatch, "point id list length differs from row count");
  }
  const auto chunks = static_cast<std::size_t>((n + kChunkRows - 1) / kChunkRows);
  auto chunk_rows = [&](std::size_t c) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(c) * kChunkRows;
    return std::pair{r0, std::min(n, r0 + kChunkRows) - r0};
  };

  // Rows are independent except for the max-pool, so both halves run in
  // row chunks; masks are keyed by point id and do not see the chunking.
  Matrix first_local(n, static_cast<Eigen::Index>(config.encoder.front()));
  Matrix chunk_max(static_cast<Eigen::Index>(chunks), static_cast<Eigen::Index>(config.encoder.back()));
  parallel_for(chunks, [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      const auto [r0, rows] = chunk_rows(c);
      Matrix x = nn::dense_forward(params.layers[0], input.middleRows(r0, rows)).cwiseMax(0.0);
      first_local.middleRows(r0, rows) = x;
      for (std::size_t l = 1; l < enc; ++l) x = nn::dense_forward(params.layers[l], x).cwiseMax(0.0);
      chunk_max.row(static_cast<Eigen::Index>(c)) = x.colwise().maxCoeff();
    }
  });
  const RowVector global = chunk_max.colwise().maxCoeff();

  Matrix logits(n, static_cast<Eigen::Index>(config.num_classes()));
  parallel_for(chunks, [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint32_t> ids;
    for (std::size_t c = begin; c < end; ++c) {
      const auto [r0, rows] = chunk_rows(c);
      ids.resize(static_cast<std::size_t>(rows));
      for (Eigen::Index k = 0; k < rows; ++k) {
        const auto i = static_cast<std::size_t>(r0 + k);
        ids[static_cast<std::size_t>(k)] = pass != nullptr && !pass->point_ids.empty() ? pass->point_ids[i]
                                                                                       : static_cast<std::uint32_t>(i);
      }
      Matrix h(rows, first_local.cols() + global.cols());
      h.leftCols(first_local.cols()) = first_local.middleRows(r0, rows);
      h.rightCols(global.cols()) = global.replicate(rows, 1);
      for (std::size_t d = 0; d < config.decoder.size(); ++d) {
        const bool hidden = d + 1 < config.decoder.size();
        h = nn::dense_forward(params.layers[enc + d], h);
        if (hidden) h = h.cwiseMax(0.0);
        if (hidden && pass != nullptr && spec.after_layer[d] && config.dropout_rate > 0.0) {
          const StochasticPass sub{pass->seed, pass->sample_index, ids};
          h = h.cwiseProduct(dropout_mask_for(config, sub, d, h.rows(), h.cols()));
        }
      }
      logits.middleRows(r0, rows) = h;
    }
  });
  ++g_passes;
  return logits;
}

ClassProbabilities forward_deterministic(const nn::ModelParams& params, const BackboneConfig& config,
                                         const PointCloud& cloud) {
  return nn::softmax_rows(forward_logits(params, config, backbone_input(cloud), nullptr));
}

ClassProbabilities forward_stochastic(const nn::ModelParams& params, const BackboneConfig& config,
                                      const PointCloud& cloud, std::uint64_t seed,
                                      std::uint32_t sample_index,
                                      const std::vector<std::uint32_t>& point_ids) {
  if (!config.dropout_spec().any()) {
    throw Error(ErrorCode::NoDropoutLayers, "stochastic inference needs a flagged dropout layer");
  }
  const StochasticPass pass{seed, sample_index, point_ids};
  return nn::softmax_rows(forward_logits(params, config, backbone_input(cloud), &pass));
}

ClassProbabilities forward_mc_style(const nn::ModelParams& params, const BackboneConfig& config,
                                    const PointCloud& cloud, std::uint64_t seed, std::uint32_t t) {
  return forward_stochastic(params, config, cloud, seed, t);
}

std::uint64_t forward_pass_count() { return g_passes.load(); }

void reset_forward_pass_count() { g_passes = 0; }

}  // namespace nsamc
