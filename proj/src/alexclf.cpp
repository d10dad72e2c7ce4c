#include "ddosnet/alexclf.hpp"

#include <algorithm>

#include "ddosnet/log.hpp"

namespace ddosnet::alexclf {

using ndgrad::Mode;
using ndgrad::Tensor;

void ClassifierConfig::validate() const {
  for (auto k : kernels)
    if (k < 1 || k % 2 == 0) throw std::invalid_argument("classifier kernels must be odd and positive");
  for (auto c : channels)
    if (c < 1) throw std::invalid_argument("classifier channels must be positive");
  for (auto w : dense_widths)
    if (w < 1) throw std::invalid_argument("classifier dense widths must be positive");
  if (pool_window < 1) throw std::invalid_argument("classifier pool_window must be >= 1");
  if (!(dropout >= 0 && dropout < 1)) throw std::invalid_argument("classifier dropout must be in [0, 1)");
  if (!(max_grad_norm >= 0)) throw std::invalid_argument("classifier max_grad_norm must be >= 0");
}

AlexNetClassifier build_classifier(std::size_t feature_dim, std::size_t n_classes, std::uint64_t seed,
                                   const ClassifierConfig& cfg) {
  cfg.validate();
  if (n_classes < 2) throw std::invalid_argument("classifier needs at least two classes");
  if (feature_dim < 1) throw std::invalid_argument("classifier needs at least one input feature");
  Rng rng(derive_seed(seed, "alexclf-init"));
  AlexNetClassifier c;
  c.feature_dim = feature_dim;
  c.n_classes = n_classes;
  c.lrn = cfg.lrn;
  c.dropout = cfg.dropout;
  c.max_grad_norm = cfg.max_grad_norm;

  std::size_t length = feature_dim, c_in = 1;
  for (std::size_t i = 0; i < 3; ++i) {
    std::size_t k = cfg.kernels[i];
    std::size_t fit = length % 2 ? length : length - 1;
    if (k > fit) {
      log_warning("classifier conv" + std::to_string(i + 1) + " kernel " + std::to_string(k) + " shrunk to " +
                  std::to_string(fit) + " for sequence length " + std::to_string(length));
      k = fit;
    }
    c.kernels[i] = k;
    c.convs[i] = ndgrad::Conv1d::create(c_in, cfg.channels[i], k, 1, k / 2, true, rng);
    c.pool_windows[i] = std::min(cfg.pool_window, length);
    length /= c.pool_windows[i];
    c_in = cfg.channels[i];
  }
  c.dense[0] = ndgrad::Dense::create(c_in * length, cfg.dense_widths[0], rng);
  c.dense[1] = ndgrad::Dense::create(cfg.dense_widths[0], cfg.dense_widths[1], rng);
  c.head = ndgrad::Dense::create(cfg.dense_widths[1], n_classes, rng);
  return c;
}

Tensor AlexNetClassifier::forward(const Tensor& x, Mode mode, Rng& rng) const {
  if (x.rank() != 2 || x.dim(1) != feature_dim)
    throw ndgrad::ShapeError("classifier built for " + std::to_string(feature_dim) + " features, got " +
                             ndgrad::shape_string(x.shape()));
  const std::size_t batch = x.dim(0);
  Tensor h = ndgrad::reshape(x, {batch, 1, feature_dim});
  for (std::size_t i = 0; i < 3; ++i) {
    h = ndgrad::relu(convs[i].forward(h));
    h = ndgrad::pool1d(h, ndgrad::PoolKind::max, pool_windows[i], pool_windows[i]);
    if (i < 2) h = ndgrad::lrn(h, lrn);
  }
  h = ndgrad::reshape(h, {batch, h.size() / batch});
  for (const auto& d : dense) h = ndgrad::dropout(ndgrad::relu(d.forward(h)), dropout, mode, rng);
  return head.forward(h);
}

ndgrad::StateList AlexNetClassifier::state() const {
  ndgrad::StateList s;
  for (std::size_t i = 0; i < 3; ++i) convs[i].collect("alexclf.conv" + std::to_string(i + 1), s);
  for (std::size_t i = 0; i < 2; ++i) dense[i].collect("alexclf.dense" + std::to_string(i + 1), s);
  head.collect("alexclf.softmax", s);
  return s;
}

LayerCensus AlexNetClassifier::census() const {
  return LayerCensus{convs.size(), pool_windows.size(), 2, dense.size(), 1};
}

std::vector<EpochRecord> train_classifier(AlexNetClassifier& c, const Matrix& features, std::span<const int> labels,
                                          const Hyperparameters& h, std::uint64_t seed) {
  h.validate();
  if (features.cols != c.feature_dim)
    throw ndgrad::ShapeError("training rows have " + std::to_string(features.cols) + " features, classifier expects " +
                             std::to_string(c.feature_dim));
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= c.n_classes)
      throw std::out_of_range("label " + std::to_string(y) + " outside the classifier's classes");
  SoftmaxTrainOptions opts;
  opts.epochs = h.epochs;
  opts.batch_size = h.batch_size;
  opts.learning_rate = h.learning_rate;
  opts.momentum = h.momentum;
  opts.weight_decay = h.weight_decay;
  opts.max_grad_norm = c.max_grad_norm;
  opts.seed = derive_seed(seed, "alexclf-train");
  auto logits = [&](const Tensor& b, Mode mode, Rng& rng) { return c.forward(b, mode, rng); };
  auto trace = train_softmax(logits, ndgrad::trainable_tensors(c.state()), features, labels, opts);
  c.trained = true;
  return trace;
}

int argmax(std::span<const double> row) {
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

Prediction predict(const AlexNetClassifier& c, const Matrix& features) {
  if (!c.trained) throw std::logic_error("predict called on an untrained classifier");
  Rng unused(0);
  Matrix logits = forward_rows([&](const Tensor& b) { return c.forward(b, Mode::eval, unused); }, features);
  Prediction p;
  p.probabilities = Matrix{logits.rows, c.n_classes, ndgrad::softmax_rows(logits.values, c.n_classes)};
  p.labels.resize(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) p.labels[i] = argmax(p.probabilities.row(i));
  return p;
}

}  // namespace ddosnet::alexclf
