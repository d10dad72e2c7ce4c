#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "ddosnet/ndgrad/tensor.hpp"

namespace ddosnet::ndgrad {

enum class Mode { train, eval };

// ---- structural -----------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape);
/// Slice [start, start+length) of the last axis.
Tensor narrow_last(const Tensor& x, std::size_t start, std::size_t length);
Tensor add(const Tensor& a, const Tensor& b);
/// y = scale * x + shift, elementwise.
Tensor affine(const Tensor& x, double scale, double shift);
/// Mean of all elements, shape [1].
Tensor mean(const Tensor& x);

// ---- convolution ----------------------------------------------------------

/// input [batch, c_in, length], kernel [c_out, c_in, k], optional bias [c_out].
/// Output length is floor((length + 2*padding - k)/stride) + 1.
Tensor conv1d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding,
              const Tensor& bias = Tensor{});

/// Adjoint of conv1d. input [batch, c_in, length], kernel [c_in, c_out, k].
/// Output length is (length-1)*stride - 2*padding + k + output_padding.
Tensor conv_transpose1d(const Tensor& input, const Tensor& kernel, std::size_t stride,
                        std::size_t padding, std::size_t output_padding = 0,
                        const Tensor& bias = Tensor{});

// ---- normalization --------------------------------------------------------

/// Running statistics owned by a batch-norm layer. Train-mode forwards
/// update them in place.
struct RunningStats {
  Tensor mean;
  Tensor var;
  double momentum = 0.1;

  static RunningStats identity(std::size_t channels);
};

/// Per-channel normalization over every axis except axis 1.
Tensor batch_norm1d(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                    RunningStats& stats, Mode mode, double epsilon = 1e-5);

struct LrnParams {
  double z = 2.0;
  std::size_t window = 5;
  double alpha = 1e-4;
  double exponent = 0.75;
};

/// Local response normalization across channels of [batch, channels, length]:
/// y_x = b_x / (z + alpha * sum_{j in window(x)} b_j^2)^exponent.
Tensor lrn(const Tensor& input, const LrnParams& params = {});

// ---- elementwise ----------------------------------------------------------

enum class ActivationKind { relu, leaky_relu, tanh, sigmoid };

Tensor activation(const Tensor& x, ActivationKind kind, double slope = 0.01);
inline Tensor relu(const Tensor& x) { return activation(x, ActivationKind::relu); }
inline Tensor leaky_relu(const Tensor& x, double slope) {
  return activation(x, ActivationKind::leaky_relu, slope);
}
inline Tensor tanh(const Tensor& x) { return activation(x, ActivationKind::tanh); }
inline Tensor sigmoid(const Tensor& x) { return activation(x, ActivationKind::sigmoid); }

/// -log(max(x, floor)).
Tensor neg_log(const Tensor& x, double floor = 1e-12);
/// -log(max(1 - x, floor)).
Tensor neg_log1m(const Tensor& x, double floor = 1e-12);

// ---- pooling --------------------------------------------------------------

enum class PoolKind { max, average, global_average };

/// Pools the last axis. global_average ignores window/stride and collapses the
/// axis to length 1.
Tensor pool1d(const Tensor& input, PoolKind kind, std::size_t window = 0, std::size_t stride = 0);

// ---- dense / heads --------------------------------------------------------

/// input [batch, in], weight [out, in], bias [out] -> input * weight^T + bias.
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// Inverted dropout: survivors scaled by 1/(1-rate) in train mode, identity in eval.
Tensor dropout(const Tensor& input, double rate, Mode mode, std::mt19937_64& rng);

struct CrossEntropy {
  Tensor loss;           // shape [1], mean negative log-likelihood
  Tensor probabilities;  // [batch, classes], not on the tape
};

CrossEntropy softmax_cross_entropy(const Tensor& logits, std::span<const int> targets);

/// Row-wise softmax with max subtraction, no gradient.
std::vector<double> softmax_rows(std::span<const double> logits, std::size_t classes);

}  // namespace ddosnet::ndgrad
