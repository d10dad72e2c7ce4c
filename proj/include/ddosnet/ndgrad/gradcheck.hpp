#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ddosnet/ndgrad/tensor.hpp"

namespace ddosnet::ndgrad {

struct GradCheckOptions {
  double epsilon = 1e-5;
  // 0 checks every coordinate; otherwise a seeded sample per tensor.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
  // Guards the relative error when both gradients are ~0.
  double denominator_floor = 1e-8;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares reverse-mode gradients of a scalar loss against central
/// differences (f(x+e) - f(x-e)) / 2e taken coordinate-by-coordinate over
/// `inputs`. `loss` must be a pure function of the inputs' values.
GradCheckResult grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> inputs,
                           const GradCheckOptions& options = {});

}  // namespace ddosnet::ndgrad
