#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ddosnet/flowdata.hpp"
#include "ddosnet/matrix.hpp"
#include "ddosnet/ndgrad/layers.hpp"
#include "ddosnet/training.hpp"

namespace ddosnet::resfeat {

/// conv1x1 -> bn -> relu -> conv3 (strided) -> bn -> relu -> conv1x1 -> bn,
/// added to the skip path (identity or 1x1 conv + bn).
struct ResidualBlock {
  ndgrad::Conv1d conv1, conv2, conv3;
  ndgrad::BatchNorm1d bn1, bn2, bn3;
  bool has_projection = false;
  ndgrad::Conv1d projection;
  ndgrad::BatchNorm1d projection_bn;

  static ResidualBlock create(std::size_t c_in, std::size_t c_out, std::size_t stride, Rng& rng);
  std::size_t in_channels() const { return conv1.weight.dim(1); }
  std::size_t out_channels() const { return conv3.weight.dim(0); }
  ndgrad::Tensor forward(const ndgrad::Tensor& x, ndgrad::Mode mode) const;
  void collect(const std::string& prefix, ndgrad::StateList& out) const;
};

struct ExtractorConfig {
  std::size_t blocks = 16;
  std::size_t base_width = 16;
  std::size_t widen_every = 4;  // channels double (stride 2) every this many blocks
  std::size_t feature_dim = 0;  // 0 means the final channel count
  double dropout = 0.2;

  void validate() const;
};

struct FeatureExtractor {
  std::size_t input_features = 0;
  ndgrad::Conv1d stem;
  ndgrad::BatchNorm1d stem_bn;
  std::vector<ResidualBlock> blocks;
  std::optional<ndgrad::Dense> projection;  // present when feature_dim differs from the final width
  std::size_t feature_dim = 0;
  double dropout = 0.2;
  bool frozen = false;

  /// rows [batch, input_features] -> pooled features [batch, feature_dim].
  /// Dropout is applied in train mode only.
  ndgrad::Tensor forward(const ndgrad::Tensor& x, ndgrad::Mode mode, Rng& rng) const;
  ndgrad::StateList state() const;
};

FeatureExtractor build_feature_extractor(std::size_t input_features, const ExtractorConfig& cfg, std::uint64_t seed);

struct ExtractorTraining {
  std::vector<EpochRecord> trace;
  double head_train_accuracy = 0.0;  // last epoch
};

/// Trains the trunk with a temporary dense softmax head, then discards the
/// head and freezes the trunk. epochs == 0 freezes at initialization.
ExtractorTraining train_feature_extractor(FeatureExtractor& f, const Matrix& x, std::span<const int> labels,
                                          std::size_t n_classes, const SoftmaxTrainOptions& opts);
ExtractorTraining train_feature_extractor(FeatureExtractor& f, const flowdata::Dataset& train,
                                          const SoftmaxTrainOptions& opts);

/// Eval-mode features, one row per input row.
Matrix extract_features(const FeatureExtractor& f, const Matrix& x);
Matrix extract_features(const FeatureExtractor& f, const flowdata::Dataset& d);

}  // namespace ddosnet::resfeat
