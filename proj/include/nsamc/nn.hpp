#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "nsamc/core_types.hpp"
#include "nsamc/rng.hpp"

namespace nsamc::nn {

/// Affine map shared by every point: out = act * weight^T + bias.
struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }
  std::size_t parameter_count() const { return static_cast<std::size_t>(weight.size() + bias.size()); }
};

/// Weights of every dense layer, in a fixed order. Flat parameter indexing
/// walks layers in order, weight row-major first, then bias.
struct ModelParams {
  std::vector<DenseLayer> layers;

  std::size_t parameter_count() const;
  double& flat(std::size_t index);
  double flat(std::size_t index) const;
  /// Throws NonFiniteValue on NaN/inf entries.
  void validate() const;
};

/// Same layout as ModelParams; holds accumulated loss gradients.
struct GradientSet {
  std::vector<DenseLayer> layers;

  static GradientSet zeros_like(const ModelParams& params);
  std::size_t parameter_count() const;
  double flat(std::size_t index) const;
  bool congruent_with(const ModelParams& params) const;
  bool all_finite() const;
  GradientSet& operator+=(const GradientSet& other);
  GradientSet& operator*=(double scale);
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero bias.
DenseLayer init_dense(std::size_t in_dim, std::size_t out_dim, RngStream& stream);

/// Throws ShapeMismatch when act.cols() != layer.in_dim().
Matrix dense_forward(const DenseLayer& layer, const Matrix& act);

Matrix relu(const Matrix& act);

struct DropoutSpec {
  std::vector<bool> after_layer;  // one flag per decoder hidden layer
  double rate = 0.5;

  bool any() const;
};

/// Identifies the mask stream of one dropout layer within one pass.
struct MaskKey {
  std::uint64_t seed = 0;
  std::uint32_t layer = 0;
  std::uint32_t sample = 0;
};

/// Per-point inverted-dropout mask: entry (i, j) is 1/(1-p) with probability
/// 1-p and 0 otherwise, drawn from the stream (seed, point_ids[i], layer,
/// sample). With empty `point_ids`, row i uses point id i.
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, const MaskKey& key,
                    const std::vector<std::uint32_t>& point_ids = {});

Matrix pointwise_dropout(const Matrix& act, double rate, const MaskKey& key,
                         const std::vector<std::uint32_t>& point_ids = {});

struct MaxPoolResult {
  RowVector values;
  std::vector<Eigen::Index> argmax;  // winning row per column, lowest index on ties
};

/// Column-wise maximum over points. Throws EmptyInput when there are no rows.
MaxPoolResult maxpool_points(const Matrix& act);

/// Max-subtracted row softmax.
ClassProbabilities softmax_rows(const Matrix& logits);

/// Reverse-mode tape for the point-wise networks in this library. Each
/// recording call evaluates its op eagerly and returns the id of the result.
class Tape {
 public:
  using ValueId = std::size_t;

  ValueId input(Matrix x);
  /// Dense layer `layer` of `params`, optionally followed by ReLU.
  ValueId dense(const ModelParams& params, std::size_t layer, ValueId in, bool relu_after);
  /// Element-wise product with a precomputed dropout mask.
  ValueId dropout(ValueId in, Matrix mask);
  ValueId maxpool(ValueId in);
  /// [local | global broadcast to every row]; `global` must have one row.
  ValueId concat_broadcast(ValueId local, ValueId global);

  const Matrix& value(ValueId id) const { return values_.at(id); }
  bool empty() const { return ops_.empty(); }
  std::size_t size() const { return values_.size(); }

 private:
  enum class OpKind { Dense, Dropout, MaxPool, ConcatBroadcast };
  struct Op {
    OpKind kind = OpKind::Dense;
    ValueId in0 = 0;
    ValueId in1 = 0;
    ValueId out = 0;
    std::size_t layer = 0;
    bool relu_after = false;
    Matrix mask;
    std::vector<Eigen::Index> argmax;
  };

  ValueId push(Matrix value);

  std::vector<Matrix> values_;
  std::vector<Op> ops_;

  friend GradientSet backward(const ModelParams&, const Tape&, ValueId, const Matrix&);
};

/// Exact gradients of sum(grad_output .* value(output)) with respect to every
/// parameter, routed through dropout masks and max-pool argmaxes.
/// Throws NoTape on an empty tape and ShapeMismatch on a bad upstream shape.
GradientSet backward(const ModelParams& params, const Tape& tape, Tape::ValueId output,
                     const Matrix& grad_output);

/// Loss evaluated at `params`; when `grads` is non-null it also receives the
/// analytic gradient.
using LossFunction = std::function<double(const ModelParams& params, GradientSet* grads)>;

/// Max over `samples` randomly chosen parameters (all of them when samples is
/// 0 or exceeds the count) of |analytic - central difference| / max(1, |analytic|).
double gradient_check(const ModelParams& params, const LossFunction& loss, double epsilon = 1e-5,
                      std::size_t samples = 100, std::uint64_t seed = 0);

struct AdamState {
  GradientSet first_moment;
  GradientSet second_moment;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const ModelParams& params);
};

/// Bias-corrected Adam update. Throws ShapeMismatch when grads or state do
/// not match params.
void adam_step(ModelParams& params, const GradientSet& grads, AdamState& state, double learning_rate);

/// Binary layout, little-endian: "NSAM" magic, u32 version, u32 layer count,
/// then per layer u32 rows, u32 cols and rows*cols f64 values of the
/// augmented matrix [weight | bias].
void save_params(const ModelParams& params, std::ostream& out);
ModelParams load_params(std::istream& in);
void save_params(const ModelParams& params, const std::string& path);
ModelParams load_params(const std::string& path);

}  // namespace nsamc::nn
