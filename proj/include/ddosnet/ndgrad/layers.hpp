#pragma once

#include <string>
#include <vector>

#include "ddosnet/ndgrad/ops.hpp"
#include "ddosnet/random.hpp"

namespace ddosnet::ndgrad {

/// A named array owned by a model. Buffers (batch-norm running stats) are
/// saved with the model but never touched by an optimizer.
struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

using StateList = std::vector<NamedTensor>;

std::vector<Tensor> trainable_tensors(const StateList& state);

/// Uniform in +-sqrt(6/(fan_in+fan_out)).
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

struct Conv1d {
  Tensor weight;  // [c_out, c_in, k]
  Tensor bias;    // [c_out] or undefined
  std::size_t stride = 1;
  std::size_t padding = 0;

  static Conv1d create(std::size_t c_in, std::size_t c_out, std::size_t k, std::size_t stride,
                       std::size_t padding, bool with_bias, Rng& rng);
  Tensor forward(const Tensor& x) const { return conv1d(x, weight, stride, padding, bias); }
  void collect(const std::string& prefix, StateList& out) const;
};

struct ConvTranspose1d {
  Tensor weight;  // [c_in, c_out, k]
  Tensor bias;
  std::size_t stride = 1;
  std::size_t padding = 0;

  static ConvTranspose1d create(std::size_t c_in, std::size_t c_out, std::size_t k,
                                std::size_t stride, std::size_t padding, bool with_bias, Rng& rng);
  Tensor forward(const Tensor& x) const {
    return conv_transpose1d(x, weight, stride, padding, 0, bias);
  }
  void collect(const std::string& prefix, StateList& out) const;
};

struct BatchNorm1d {
  Tensor gamma;
  Tensor beta;
  RunningStats stats;
  double epsilon = 1e-5;

  static BatchNorm1d create(std::size_t channels);
  // RunningStats holds tensor handles, so the copy updates the shared buffers.
  Tensor forward(const Tensor& x, Mode mode) const {
    RunningStats s = stats;
    return batch_norm1d(x, gamma, beta, s, mode, epsilon);
  }
  void collect(const std::string& prefix, StateList& out) const;
};

struct Dense {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]

  static Dense create(std::size_t in, std::size_t out, Rng& rng);
  Tensor forward(const Tensor& x) const { return dense(x, weight, bias); }
  void collect(const std::string& prefix, StateList& out) const;
};

}  // namespace ddosnet::ndgrad
