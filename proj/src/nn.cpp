#include "nsamc/nn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "nsamc/parallel.hpp"

namespace nsamc::nn {

namespace {

std::size_t layer_offset_lookup(const std::vector<DenseLayer>& layers, std::size_t index,
                                std::size_t& layer) {
  for (layer = 0; layer < layers.size(); ++layer) {
    const auto count = layers[layer].parameter_count();
    if (index < count) return index;
    index -= count;
  }
  throw Error(ErrorCode::ShapeMismatch, "flat parameter index out of range", index);
}

double& flat_ref(std::vector<DenseLayer>& layers, std::size_t index) {
  std::size_t layer = 0;
  const auto local = layer_offset_lookup(layers, index, layer);
  auto& l = layers[layer];
  const auto wsize = static_cast<std::size_t>(l.weight.size());
  if (local < wsize) return l.weight.data()[local];
  return l.bias.data()[local - wsize];
}

std::size_t count_params(const std::vector<DenseLayer>& layers) {
  std::size_t total = 0;
  for (const auto& l : layers) total += l.parameter_count();
  return total;
}

}  // namespace

std::size_t ModelParams::parameter_count() const { return count_params(layers); }

double& ModelParams::flat(std::size_t index) { return flat_ref(layers, index); }

double ModelParams::flat(std::size_t index) const {
  return flat_ref(const_cast<std::vector<DenseLayer>&>(layers), index);
}

void ModelParams::validate() const {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].bias.size() != layers[l].weight.rows()) {
      throw Error(ErrorCode::ShapeMismatch, "bias length differs from weight rows", l);
    }
    if (!layers[l].weight.allFinite() || !layers[l].bias.allFinite()) {
      throw Error(ErrorCode::NonFiniteValue, "non-finite parameter in layer", l);
    }
  }
}

GradientSet GradientSet::zeros_like(const ModelParams& params) {
  GradientSet out;
  out.layers.reserve(params.layers.size());
  for (const auto& l : params.layers) {
    out.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  }
  return out;
}

std::size_t GradientSet::parameter_count() const { return count_params(layers); }

double GradientSet::flat(std::size_t index) const {
  return flat_ref(const_cast<std::vector<DenseLayer>&>(layers), index);
}

bool GradientSet::congruent_with(const ModelParams& params) const {
  if (layers.size() != params.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].weight.rows() != params.layers[l].weight.rows() ||
        layers[l].weight.cols() != params.layers[l].weight.cols() ||
        layers[l].bias.size() != params.layers[l].bias.size()) {
      return false;
    }
  }
  return true;
}

bool GradientSet::all_finite() const {
  return std::all_of(layers.begin(), layers.end(),
                     [](const DenseLayer& l) { return l.weight.allFinite() && l.bias.allFinite(); });
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  if (other.layers.size() != layers.size()) throw Error(ErrorCode::ShapeMismatch, "gradient layer count");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weight += other.layers[l].weight;
    layers[l].bias += other.layers[l].bias;
  }
  return *this;
}

GradientSet& GradientSet::operator*=(double scale) {
  for (auto& l : layers) {
    l.weight *= scale;
    l.bias *= scale;
  }
  return *this;
}

DenseLayer init_dense(std::size_t in_dim, std::size_t out_dim, RngStream& stream) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  DenseLayer layer{Matrix(out_dim, in_dim), Vector::Zero(static_cast<Eigen::Index>(out_dim))};
  for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
    layer.weight.data()[i] = stream.uniform(-limit, limit);
  }
  return layer;
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& act) {
  if (act.cols() != layer.weight.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "activation width " + std::to_string(act.cols()) +
                                              " != layer input " + std::to_string(layer.weight.cols()));
  }
  Matrix out = act * layer.weight.transpose();
  out.rowwise() += layer.bias.transpose();
  return out;
}

Matrix relu(const Matrix& act) { return act.cwiseMax(0.0); }

bool DropoutSpec::any() const {
  return std::any_of(after_layer.begin(), after_layer.end(), [](bool b) { return b; });
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, const MaskKey& key,
                    const std::vector<std::uint32_t>& point_ids) {
  if (!point_ids.empty() && point_ids.size() != rows) {
    throw Error(ErrorCode::ShapeMismatch, "point id list length differs from row count");
  }
  Matrix mask(rows, cols);
  if (rate <= 0.0) {
    mask.setOnes();
    return mask;
  }
  const double keep = 1.0 - rate;
  const double scale = 1.0 / keep;
  const auto threshold = RngStream::bernoulli_threshold(keep);
  parallel_for(rows, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto id = point_ids.empty() ? static_cast<std::uint32_t>(i) : point_ids[i];
      RngStream stream({key.seed, id, key.layer, key.sample});
      double* row = mask.data() + i * cols;
      for (std::size_t j = 0; j < cols; ++j) row[j] = stream.next_u32() < threshold ? scale : 0.0;
    }
  });
  return mask;
}

Matrix pointwise_dropout(const Matrix& act, double rate, const MaskKey& key,
                         const std::vector<std::uint32_t>& point_ids) {
  if (rate <= 0.0) return act;
  const Matrix mask = dropout_mask(static_cast<std::size_t>(act.rows()),
                                   static_cast<std::size_t>(act.cols()), rate, key, point_ids);
  return act.cwiseProduct(mask);
}

MaxPoolResult maxpool_points(const Matrix& act) {
  if (act.rows() == 0) throw Error(ErrorCode::EmptyInput, "max-pool over zero points");
  MaxPoolResult out{RowVector(act.cols()), std::vector<Eigen::Index>(static_cast<std::size_t>(act.cols()), 0)};
  out.values = act.row(0);
  for (Eigen::Index i = 1; i < act.rows(); ++i) {
    for (Eigen::Index j = 0; j < act.cols(); ++j) {
      if (act(i, j) > out.values(j)) {
        out.values(j) = act(i, j);
        out.argmax[static_cast<std::size_t>(j)] = i;
      }
    }
  }
  return out;
}

ClassProbabilities softmax_rows(const Matrix& logits) {
  ClassProbabilities out{Matrix(logits.rows(), logits.cols())};
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double peak = logits.row(i).maxCoeff();
    auto row = out.probs.row(i);
    row = (logits.row(i).array() - peak).exp().matrix();
    row /= row.sum();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tape

Tape::ValueId Tape::push(Matrix value) {
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

Tape::ValueId Tape::input(Matrix x) { return push(std::move(x)); }

Tape::ValueId Tape::dense(const ModelParams& params, std::size_t layer, ValueId in, bool relu_after) {
  Matrix out = dense_forward(params.layers.at(layer), values_.at(in));
  if (relu_after) out = out.cwiseMax(0.0);
  const auto id = push(std::move(out));
  Op op;
  op.kind = OpKind::Dense;
  op.in0 = in;
  op.out = id;
  op.layer = layer;
  op.relu_after = relu_after;
  ops_.push_back(std::move(op));
  return id;
}

Tape::ValueId Tape::dropout(ValueId in, Matrix mask) {
  const Matrix& x = values_.at(in);
  if (mask.rows() != x.rows() || mask.cols() != x.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "dropout mask shape");
  }
  const auto id = push(x.cwiseProduct(mask));
  Op op;
  op.kind = OpKind::Dropout;
  op.in0 = in;
  op.out = id;
  op.mask = std::move(mask);
  ops_.push_back(std::move(op));
  return id;
}

Tape::ValueId Tape::maxpool(ValueId in) {
  auto pooled = maxpool_points(values_.at(in));
  const auto id = push(Matrix(pooled.values));
  Op op;
  op.kind = OpKind::MaxPool;
  op.in0 = in;
  op.out = id;
  op.argmax = std::move(pooled.argmax);
  ops_.push_back(std::move(op));
  return id;
}

Tape::ValueId Tape::concat_broadcast(ValueId local, ValueId global) {
  const Matrix& l = values_.at(local);
  const Matrix& g = values_.at(global);
  if (g.rows() != 1) throw Error(ErrorCode::ShapeMismatch, "global feature must be a single row");
  Matrix out(l.rows(), l.cols() + g.cols());
  out.leftCols(l.cols()) = l;
  out.rightCols(g.cols()) = g.replicate(l.rows(), 1);
  const auto id = push(std::move(out));
  Op op;
  op.kind = OpKind::ConcatBroadcast;
  op.in0 = local;
  op.in1 = global;
  op.out = id;
  ops_.push_back(std::move(op));
  return id;
}

GradientSet backward(const ModelParams& params, const Tape& tape, Tape::ValueId output,
                     const Matrix& grad_output) {
  if (tape.empty()) throw Error(ErrorCode::NoTape, "backward called without a recorded forward pass");
  if (output >= tape.values_.size()) throw Error(ErrorCode::NoTape, "output id not on tape");
  const Matrix& out_value = tape.values_[output];
  if (grad_output.rows() != out_value.rows() || grad_output.cols() != out_value.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "upstream gradient shape differs from output");
  }

  GradientSet grads = GradientSet::zeros_like(params);
  std::vector<Matrix> adjoint(tape.values_.size());
  adjoint[output] = grad_output;

  auto accumulate = [&](Tape::ValueId id, const Matrix& g) {
    if (adjoint[id].size() == 0) {
      adjoint[id] = g;
    } else {
      adjoint[id] += g;
    }
  };

  for (auto it = tape.ops_.rbegin(); it != tape.ops_.rend(); ++it) {
    const auto& op = *it;
    if (adjoint[op.out].size() == 0) continue;
    Matrix upstream = std::move(adjoint[op.out]);
    adjoint[op.out] = Matrix();
    switch (op.kind) {
      case Tape::OpKind::Dense: {
        if (op.relu_after) {
          upstream = (tape.values_[op.out].array() > 0.0).select(upstream, 0.0);
        }
        const Matrix& x = tape.values_[op.in0];
        const auto& layer = params.layers[op.layer];
        grads.layers[op.layer].weight.noalias() += upstream.transpose() * x;
        grads.layers[op.layer].bias += upstream.colwise().sum().transpose();
        Matrix dx = upstream * layer.weight;
        accumulate(op.in0, dx);
        break;
      }
      case Tape::OpKind::Dropout:
        accumulate(op.in0, upstream.cwiseProduct(op.mask));
        break;
      case Tape::OpKind::MaxPool: {
        const Matrix& x = tape.values_[op.in0];
        Matrix dx = Matrix::Zero(x.rows(), x.cols());
        for (std::size_t j = 0; j < op.argmax.size(); ++j) {
          const auto col = static_cast<Eigen::Index>(j);
          dx(op.argmax[j], col) += upstream(0, col);
        }
        accumulate(op.in0, dx);
        break;
      }
      case Tape::OpKind::ConcatBroadcast: {
        const auto local_cols = tape.values_[op.in0].cols();
        const auto global_cols = tape.values_[op.in1].cols();
        accumulate(op.in0, upstream.leftCols(local_cols));
        accumulate(op.in1, upstream.rightCols(global_cols).colwise().sum());
        break;
      }
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Verification and optimization

double gradient_check(const ModelParams& params, const LossFunction& loss, double epsilon,
                      std::size_t samples, std::uint64_t seed) {
  const std::size_t total = params.parameter_count();
  GradientSet analytic;
  loss(params, &analytic);
  if (!analytic.congruent_with(params)) {
    throw Error(ErrorCode::ShapeMismatch, "loss function returned incongruent gradients");
  }

  std::vector<std::size_t> chosen(total);
  std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  if (samples > 0 && samples < total) {
    RngStream stream({seed, 0, StreamDomain::kMisc, 0});
    for (std::size_t i = 0; i < samples; ++i) {
      const auto j = i + static_cast<std::size_t>(stream.below(total - i));
      std::swap(chosen[i], chosen[j]);
    }
    chosen.resize(samples);
  }

  ModelParams probe = params;
  double worst = 0.0;
  for (const auto index : chosen) {
    const double original = probe.flat(index);
    probe.flat(index) = original + epsilon;
    const double up = loss(probe, nullptr);
    probe.flat(index) = original - epsilon;
    const double down = loss(probe, nullptr);
    probe.flat(index) = original;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double exact = analytic.flat(index);
    worst = std::max(worst, std::abs(exact - numeric) / std::max(1.0, std::abs(exact)));
  }
  return worst;
}

AdamState AdamState::for_params(const ModelParams& params) {
  AdamState state;
  state.first_moment = GradientSet::zeros_like(params);
  state.second_moment = GradientSet::zeros_like(params);
  return state;
}

void adam_step(ModelParams& params, const GradientSet& grads, AdamState& state, double learning_rate) {
  if (!grads.congruent_with(params)) throw Error(ErrorCode::ShapeMismatch, "gradients do not match params");
  if (state.first_moment.layers.empty() && !params.layers.empty()) {
    state.first_moment = GradientSet::zeros_like(params);
    state.second_moment = GradientSet::zeros_like(params);
  }
  if (!state.first_moment.congruent_with(params) || !state.second_moment.congruent_with(params)) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match params");
  }
  ++state.step;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    param.array() -= learning_rate * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + state.epsilon);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weight, grads.layers[l].weight, state.first_moment.layers[l].weight,
           state.second_moment.layers[l].weight);
    update(params.layers[l].bias, grads.layers[l].bias, state.first_moment.layers[l].bias,
           state.second_moment.layers[l].bias);
  }
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr std::array<char, 4> kMagic = {'N', 'S', 'A', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<unsigned char, 4> bytes = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                              static_cast<unsigned char>(v >> 16),
                                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(bytes.data()), 4);
}

void put_f64(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof bits);
  put_u32(out, static_cast<std::uint32_t>(bits));
  put_u32(out, static_cast<std::uint32_t>(bits >> 32));
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), 4)) {
    throw Error(ErrorCode::ParseError, "truncated parameter file");
  }
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

double get_f64(std::istream& in) {
  const std::uint64_t lo = get_u32(in);
  const std::uint64_t hi = get_u32(in);
  const std::uint64_t bits = lo | (hi << 32);
  double d;
  std::memcpy(&d, &bits, sizeof d);
  return d;
}

}  // namespace

void save_params(const ModelParams& params, std::ostream& out) {
  out.write(kMagic.data(), 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(params.layers.size()));
  for (const auto& layer : params.layers) {
    const auto rows = layer.weight.rows();
    const auto cols = layer.weight.cols();
    put_u32(out, static_cast<std::uint32_t>(rows));
    put_u32(out, static_cast<std::uint32_t>(cols + 1));
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) put_f64(out, layer.weight(r, c));
      put_f64(out, layer.bias(r));
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing parameters");
}

ModelParams load_params(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kMagic) {
    throw Error(ErrorCode::ParseError, "bad parameter file magic");
  }
  const auto version = get_u32(in);
  if (version != kVersion) throw Error(ErrorCode::ParseError, "unsupported version " + std::to_string(version));
  const auto count = get_u32(in);
  ModelParams params;
  params.layers.reserve(count);
  for (std::uint32_t l = 0; l < count; ++l) {
    const auto rows = get_u32(in);
    const auto cols = get_u32(in);
    if (cols < 1) throw Error(ErrorCode::ParseError, "layer without bias column", l);
    DenseLayer layer{Matrix(rows, cols - 1), Vector(rows)};
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(rows); ++r) {
      for (Eigen::Index c = 0; c + 1 < static_cast<Eigen::Index>(cols); ++c) layer.weight(r, c) = get_f64(in);
      layer.bias(r) = get_f64(in);
    }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

void save_params(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path);
  save_params(params, out);
}

ModelParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return load_params(in);
}

}  // namespace nsamc::nn
