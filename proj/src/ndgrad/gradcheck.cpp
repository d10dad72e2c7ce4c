#include "ddosnet/ndgrad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ddosnet/random.hpp"

namespace ddosnet::ndgrad {

GradCheckResult grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> inputs,
                           const GradCheckOptions& options) {
  for (auto& t : inputs) t.zero_grad();
  loss().backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (const auto& t : inputs) {
    if (t.has_grad())
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    else
      analytic.emplace_back(t.size(), 0.0);
  }

  GradCheckResult result;
  Rng rng(options.seed);
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    auto& t = inputs[ti];
    std::vector<std::size_t> coords(t.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords_per_tensor && coords.size() > options.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    auto data = t.mutable_data();
    for (std::size_t i : coords) {
      const double saved = data[i];
      data[i] = saved + options.epsilon;
      const double up = loss().item();
      data[i] = saved - options.epsilon;
      const double down = loss().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double a = analytic[ti][i];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      const double err = std::abs(a - numeric) / denom;
      ++result.coordinates;
      if (err > result.max_relative_error || !std::isfinite(err)) {
        result.max_relative_error = std::isfinite(err) ? err : INFINITY;
        result.worst_tensor = ti;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  for (auto& t : inputs) t.zero_grad();
  return result;
}

}  // namespace ddosnet::ndgrad
