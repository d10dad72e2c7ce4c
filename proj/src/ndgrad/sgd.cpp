#include "ddosnet/ndgrad/sgd.hpp"

#include <stdexcept>

namespace ddosnet::ndgrad {

SgdState make_sgd_state(const std::vector<Tensor>& params, double learning_rate, double momentum,
                        double weight_decay) {
  SgdState s;
  s.learning_rate = learning_rate;
  s.momentum = momentum;
  s.weight_decay = weight_decay;
  s.velocity.reserve(params.size());
  for (const auto& p : params) s.velocity.emplace_back(p.size(), 0.0);
  return s;
}

void sgd_update(std::vector<Tensor>& params, SgdState& state) {
  if (state.velocity.size() != params.size())
    throw std::invalid_argument("sgd_update: velocity buffer count does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i].mutable_data();
    auto& v = state.velocity[i];
    if (v.size() != data.size()) throw ShapeError("sgd_update: velocity shape mismatch");
    auto grad = params[i].grad();
    const bool has = !grad.empty();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double g = (has ? grad[j] : 0.0) + state.weight_decay * data[j];
      v[j] = state.momentum * v[j] + g;
      data[j] -= state.learning_rate * v[j];
    }
  }
}

Sgd::Sgd(std::vector<Tensor> params, double learning_rate, double momentum, double weight_decay)
    : params_(std::move(params)),
      state_(make_sgd_state(params_, learning_rate, momentum, weight_decay)) {}

void Sgd::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace ddosnet::ndgrad
