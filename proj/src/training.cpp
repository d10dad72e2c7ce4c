#include "ddosnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ddosnet/ndgrad/sgd.hpp"

namespace ddosnet {

using ndgrad::Tensor;

Tensor gather_rows(const Matrix& m, std::span<const std::size_t> idx) {
  std::vector<double> out;
  out.reserve(idx.size() * m.cols);
  for (auto i : idx) {
    auto r = m.row(i);
    out.insert(out.end(), r.begin(), r.end());
  }
  return Tensor({idx.size(), m.cols}, std::move(out));
}

namespace {

void clip_gradients(std::vector<Tensor>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& t : params)
    if (t.has_grad())
      for (double g : t.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (!(norm > max_norm)) return;
  const double scale = max_norm / norm;
  for (auto& t : params)
    if (t.has_grad())
      for (double& g : t.node_ptr()->grad_buffer()) g *= scale;
}

}  // namespace

std::vector<EpochRecord> train_softmax(const LogitsFn& logits, std::vector<Tensor> params, const Matrix& x,
                                       std::span<const int> labels, const SoftmaxTrainOptions& opts) {
  if (labels.size() != x.rows) throw std::invalid_argument("label count does not match row count");
  if (x.rows == 0) throw std::invalid_argument("cannot train on zero rows");
  if (opts.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");

  ndgrad::Sgd sgd(params, opts.learning_rate, opts.momentum, opts.weight_decay);
  Rng rng(opts.seed);
  std::vector<std::size_t> order(x.rows);
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochRecord> trace;

  for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      std::size_t n = std::min(opts.batch_size, order.size() - start);
      auto idx = std::span<const std::size_t>(order).subspan(start, n);
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) y[i] = labels[idx[i]];

      sgd.zero_grad();
      Tensor z = logits(gather_rows(x, idx), ndgrad::Mode::train, rng);
      auto ce = ndgrad::softmax_cross_entropy(z, y);
      ce.loss.backward();
      if (opts.max_grad_norm > 0) clip_gradients(params, opts.max_grad_norm);
      sgd.step();

      loss_sum += ce.loss.item() * static_cast<double>(n);
      const std::size_t k = z.dim(1);
      auto p = ce.probabilities.data();
      for (std::size_t i = 0; i < n; ++i) {
        auto row = p.subspan(i * k, k);
        auto best = std::max_element(row.begin(), row.end()) - row.begin();
        correct += best == y[i];
      }
    }
    trace.push_back({epoch, loss_sum / static_cast<double>(x.rows),
                     static_cast<double>(correct) / static_cast<double>(x.rows)});
  }
  sgd.zero_grad();
  return trace;
}

Matrix forward_rows(const std::function<Tensor(const Tensor&)>& fn, const Matrix& x, std::size_t chunk) {
  Matrix out;
  out.rows = x.rows;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < x.rows; start += chunk) {
    std::size_t n = std::min(chunk, x.rows - start);
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), start);
    Tensor y = fn(gather_rows(x, idx));
    if (y.rank() != 2 || y.dim(0) != n) throw std::logic_error("forward_rows expects [batch, width] outputs");
    out.cols = y.dim(1);
    auto v = y.data();
    out.values.insert(out.values.end(), v.begin(), v.end());
  }
  return out;
}

std::string epoch_trace_csv(const std::vector<EpochRecord>& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,loss,train_acc\n";
  for (const auto& r : trace) out << r.epoch << ',' << r.loss << ',' << r.accuracy << '\n';
  return out.str();
}

}  // namespace ddosnet
