#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace nsamc {

/// Row-major dense matrix; one row per point throughout the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

enum class ErrorCode {
  DimensionMismatch,
  NonFiniteValue,
  LabelOutOfRange,
  EmptyCloud,
  TooFewPoints,
  NonPositiveVoxelSize,
  ShapeMismatch,
  EmptyInput,
  NoTape,
  NoDropoutLayers,
  MissingLabels,
  NegativeUncertainty,
  LengthMismatch,
  EmptyMatrix,
  NoVoxels,
  ParseError,
  IoError,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library. `where()` carries the offending row,
/// line or parameter index when one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::optional<std::size_t> where = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> where() const noexcept { return where_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> where_;
};

struct PointCloud {
  Matrix coords;    // N x 3, meters
  Matrix features;  // N x F, F may be 0
  std::optional<std::vector<int>> labels;
  int num_classes = 1;

  std::size_t size() const { return static_cast<std::size_t>(coords.rows()); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features.cols()); }
  bool has_labels() const { return labels.has_value(); }
};

/// Throws DimensionMismatch, NonFiniteValue or LabelOutOfRange naming the
/// first offending row; otherwise returns the cloud unchanged.
const PointCloud& validate_cloud(const PointCloud& cloud);

/// N x M, each row on the probability simplex.
struct ClassProbabilities {
  Matrix probs;

  std::size_t size() const { return static_cast<std::size_t>(probs.rows()); }
  std::size_t num_classes() const { return static_cast<std::size_t>(probs.cols()); }
  std::vector<int> argmax() const;
};

enum class DropoutConfig { Con1, Con2, Con3 };

std::string_view to_string(DropoutConfig config);
DropoutConfig parse_dropout_config(std::string_view text);

struct RunConfig {
  std::uint64_t seed = 0;
  int neighbor_count = 10;
  double dropout_rate = 0.5;
  double alpha = 0.5;
  double learning_rate = 0.001;
  int batch_size = 16;
  int epochs = 20;
  DropoutConfig dropout_config = DropoutConfig::Con1;

  /// Throws InvalidConfig when a field is out of range.
  void validate() const;
};

}  // namespace nsamc
