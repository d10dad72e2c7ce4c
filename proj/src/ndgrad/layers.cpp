#include "ddosnet/ndgrad/layers.hpp"

#include <cmath>

namespace ddosnet::ndgrad {

std::vector<Tensor> trainable_tensors(const StateList& state) {
  std::vector<Tensor> out;
  for (const auto& s : state)
    if (s.trainable) out.push_back(s.tensor);
  return out;
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  std::vector<double> data(shape_size(shape));
  for (double& v : data) v = u(rng);
  return Tensor(std::move(shape), std::move(data), true);
}

Conv1d Conv1d::create(std::size_t c_in, std::size_t c_out, std::size_t k, std::size_t stride,
                      std::size_t padding, bool with_bias, Rng& rng) {
  Conv1d c;
  c.weight = glorot_uniform({c_out, c_in, k}, c_in * k, c_out * k, rng);
  if (with_bias) c.bias = Tensor::zeros({c_out}, true);
  c.stride = stride;
  c.padding = padding;
  return c;
}

void Conv1d::collect(const std::string& prefix, StateList& out) const {
  out.push_back({prefix + ".weight", weight, true});
  if (bias.defined()) out.push_back({prefix + ".bias", bias, true});
}

ConvTranspose1d ConvTranspose1d::create(std::size_t c_in, std::size_t c_out, std::size_t k,
                                        std::size_t stride, std::size_t padding, bool with_bias,
                                        Rng& rng) {
  ConvTranspose1d c;
  c.weight = glorot_uniform({c_in, c_out, k}, c_in * k, c_out * k, rng);
  if (with_bias) c.bias = Tensor::zeros({c_out}, true);
  c.stride = stride;
  c.padding = padding;
  return c;
}

void ConvTranspose1d::collect(const std::string& prefix, StateList& out) const {
  out.push_back({prefix + ".weight", weight, true});
  if (bias.defined()) out.push_back({prefix + ".bias", bias, true});
}

BatchNorm1d BatchNorm1d::create(std::size_t channels) {
  BatchNorm1d bn;
  bn.gamma = Tensor::full({channels}, 1.0, true);
  bn.beta = Tensor::zeros({channels}, true);
  bn.stats = RunningStats::identity(channels);
  return bn;
}

void BatchNorm1d::collect(const std::string& prefix, StateList& out) const {
  out.push_back({prefix + ".gamma", gamma, true});
  out.push_back({prefix + ".beta", beta, true});
  out.push_back({prefix + ".running_mean", stats.mean, false});
  out.push_back({prefix + ".running_var", stats.var, false});
}

Dense Dense::create(std::size_t in, std::size_t out, Rng& rng) {
  Dense d;
  d.weight = glorot_uniform({out, in}, in, out, rng);
  d.bias = Tensor::zeros({out}, true);
  return d;
}

void Dense::collect(const std::string& prefix, StateList& out) const {
  out.push_back({prefix + ".weight", weight, true});
  out.push_back({prefix + ".bias", bias, true});
}

}  // namespace ddosnet::ndgrad
