#pragma once

#include <vector>

#include "ddosnet/ndgrad/tensor.hpp"

namespace ddosnet::ndgrad {

struct SgdState {
  std::vector<std::vector<double>> velocity;  // one buffer per parameter
  double learning_rate = 0.01;
  double momentum = 0.0;
  double weight_decay = 0.0;
};

SgdState make_sgd_state(const std::vector<Tensor>& params, double learning_rate, double momentum,
                        double weight_decay);

/// v <- momentum*v + grad + weight_decay*param; param <- param - lr*v.
/// Parameters without a gradient are treated as having a zero gradient.
void sgd_update(std::vector<Tensor>& params, SgdState& state);

class Sgd {
 public:
  Sgd(std::vector<Tensor> params, double learning_rate, double momentum = 0.0,
      double weight_decay = 0.0);

  void zero_grad();
  void step() { sgd_update(params_, state_); }
  const SgdState& state() const { return state_; }

 private:
  std::vector<Tensor> params_;
  SgdState state_;
};

}  // namespace ddosnet::ndgrad
