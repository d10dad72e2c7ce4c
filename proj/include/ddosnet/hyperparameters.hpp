#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ddosnet {

/// Classifier training knobs searched by the tuner.
struct Hyperparameters {
  double momentum = 0.9;
  double weight_decay = 0.005;
  std::size_t epochs = 100;
  double learning_rate = 0.001;
  std::size_t batch_size = 32;

  /// momentum in [0,1), lr > 0, batch >= 1, epochs >= 1, decay >= 0.
  void validate() const {
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
  }

  bool operator==(const Hyperparameters&) const = default;
};

/// The tuned optimum reported for the reference model.
inline constexpr Hyperparameters kPublishedHyperparameters{0.9, 0.005, 100, 0.001, 32};

}  // namespace ddosnet
