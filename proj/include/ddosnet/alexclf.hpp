#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ddosnet/hyperparameters.hpp"
#include "ddosnet/matrix.hpp"
#include "ddosnet/ndgrad/layers.hpp"
#include "ddosnet/training.hpp"

namespace ddosnet::alexclf {

struct ClassifierConfig {
  std::array<std::size_t, 3> kernels{7, 5, 3};
  std::array<std::size_t, 3> channels{32, 64, 64};
  std::size_t pool_window = 2;
  std::array<std::size_t, 2> dense_widths{128, 64};
  double dropout = 0.5;
  ndgrad::LrnParams lrn{};
  double max_grad_norm = 1.0;  // global gradient-norm cap per step; 0 disables

  void validate() const;
};

struct LayerCensus {
  std::size_t conv = 0;
  std::size_t pool = 0;
  std::size_t lrn = 0;
  std::size_t dense = 0;
  std::size_t softmax = 0;

  bool operator==(const LayerCensus&) const = default;
};

struct AlexNetClassifier {
  std::size_t feature_dim = 0;
  std::size_t n_classes = 0;
  std::array<ndgrad::Conv1d, 3> convs;
  std::array<std::size_t, 3> pool_windows{};
  std::array<std::size_t, 3> kernels{};  // after any auto-shrink
  ndgrad::LrnParams lrn{};
  std::array<ndgrad::Dense, 2> dense;
  ndgrad::Dense head;  // softmax layer
  double dropout = 0.5;
  double max_grad_norm = 1.0;
  bool trained = false;

  /// rows [batch, feature_dim] -> logits [batch, n_classes].
  ndgrad::Tensor forward(const ndgrad::Tensor& x, ndgrad::Mode mode, Rng& rng) const;
  ndgrad::StateList state() const;
  LayerCensus census() const;
};

/// Kernels larger than the sequence reaching a conv stage shrink to the
/// largest odd size that fits (with a warning).
AlexNetClassifier build_classifier(std::size_t feature_dim, std::size_t n_classes, std::uint64_t seed,
                                   const ClassifierConfig& cfg = {});

struct Prediction {
  std::vector<int> labels;
  Matrix probabilities;  // [rows, n_classes]
};

/// Mini-batch SGD with the given hyperparameters; one trace record per epoch.
std::vector<EpochRecord> train_classifier(AlexNetClassifier& c, const Matrix& features, std::span<const int> labels,
                                          const Hyperparameters& h, std::uint64_t seed);

/// Eval-mode probabilities and argmax labels (ties go to the lowest index).
Prediction predict(const AlexNetClassifier& c, const Matrix& features);

/// Index of the largest entry, lowest index on ties.
int argmax(std::span<const double> row);

}  // namespace ddosnet::alexclf
