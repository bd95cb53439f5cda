#include "nsamc/core_types.hpp"

#include <cmath>

namespace nsamc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::NonPositiveVoxelSize: return "NonPositiveVoxelSize";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NoTape: return "NoTape";
    case ErrorCode::NoDropoutLayers: return "NoDropoutLayers";
    case ErrorCode::MissingLabels: return "MissingLabels";
    case ErrorCode::NegativeUncertainty: return "NegativeUncertainty";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::NoVoxels: return "NoVoxels";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

namespace {

std::string decorate(ErrorCode code, const std::string& message, std::optional<std::size_t> where) {
  std::string out(to_string(code));
  if (where) out += "(" + std::to_string(*where) + ")";
  if (!message.empty()) out += ": " + message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::optional<std::size_t> where)
    : std::runtime_error(decorate(code, message, where)), code_(code), where_(where) {}

const PointCloud& validate_cloud(const PointCloud& cloud) {
  const auto n = cloud.coords.rows();
  if (cloud.coords.cols() != 3) {
    throw Error(ErrorCode::DimensionMismatch, "coords must have 3 columns");
  }
  if (cloud.features.rows() != n) {
    throw Error(ErrorCode::DimensionMismatch, "features row count differs from coords",
                static_cast<std::size_t>(std::min(n, cloud.features.rows())));
  }
  if (cloud.labels && static_cast<Eigen::Index>(cloud.labels->size()) != n) {
    throw Error(ErrorCode::DimensionMismatch, "labels length differs from coords",
                std::min<std::size_t>(static_cast<std::size_t>(n), cloud.labels->size()));
  }
  if (cloud.num_classes < 1) {
    throw Error(ErrorCode::DimensionMismatch, "num_classes must be positive");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!cloud.coords.row(i).allFinite() || !cloud.features.row(i).allFinite()) {
      throw Error(ErrorCode::NonFiniteValue, "non-finite coordinate or feature",
                  static_cast<std::size_t>(i));
    }
  }
  if (cloud.labels) {
    for (std::size_t i = 0; i < cloud.labels->size(); ++i) {
      const int label = (*cloud.labels)[i];
      if (label < 0 || label >= cloud.num_classes) {
        throw Error(ErrorCode::LabelOutOfRange,
                    "label " + std::to_string(label) + " outside [0, " +
                        std::to_string(cloud.num_classes) + ")",
                    i);
      }
    }
  }
  return cloud;
}

std::vector<int> ClassProbabilities::argmax() const {
  std::vector<int> out(size());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index best = 0;
    probs.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

std::string_view to_string(DropoutConfig config) {
  switch (config) {
    case DropoutConfig::Con1: return "Con_1";
    case DropoutConfig::Con2: return "Con_2";
    case DropoutConfig::Con3: return "Con_3";
  }
  return "Con_1";
}

DropoutConfig parse_dropout_config(std::string_view text) {
  if (text == "Con_1" || text == "con1" || text == "1") return DropoutConfig::Con1;
  if (text == "Con_2" || text == "con2" || text == "2") return DropoutConfig::Con2;
  if (text == "Con_3" || text == "con3" || text == "3") return DropoutConfig::Con3;
  throw Error(ErrorCode::InvalidConfig, "unknown dropout config '" + std::string(text) + "'");
}

void RunConfig::validate() const {
  if (neighbor_count < 1) throw Error(ErrorCode::InvalidConfig, "neighbor_count must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "dropout_rate must lie in [0, 1)");
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::InvalidConfig, "alpha must be finite and >= 0");
  }
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be > 0");
  if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  if (epochs < 0) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 0");
}

}  // namespace nsamc
