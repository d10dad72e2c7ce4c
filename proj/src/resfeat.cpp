#include "ddosnet/resfeat.hpp"

#include <set>

namespace ddosnet::resfeat {

using ndgrad::Mode;
using ndgrad::Tensor;

ResidualBlock ResidualBlock::create(std::size_t c_in, std::size_t c_out, std::size_t stride, Rng& rng) {
  ResidualBlock b;
  const std::size_t mid = std::max<std::size_t>(4, c_out / 4);
  b.conv1 = ndgrad::Conv1d::create(c_in, mid, 1, 1, 0, false, rng);
  b.bn1 = ndgrad::BatchNorm1d::create(mid);
  b.conv2 = ndgrad::Conv1d::create(mid, mid, 3, stride, 1, false, rng);
  b.bn2 = ndgrad::BatchNorm1d::create(mid);
  b.conv3 = ndgrad::Conv1d::create(mid, c_out, 1, 1, 0, false, rng);
  b.bn3 = ndgrad::BatchNorm1d::create(c_out);
  if (c_in != c_out || stride != 1) {
    b.has_projection = true;
    b.projection = ndgrad::Conv1d::create(c_in, c_out, 1, stride, 0, false, rng);
    b.projection_bn = ndgrad::BatchNorm1d::create(c_out);
  }
  return b;
}

Tensor ResidualBlock::forward(const Tensor& x, Mode mode) const {
  if (x.rank() != 3 || x.dim(1) != in_channels())
    throw ndgrad::ShapeError("residual block expects " + std::to_string(in_channels()) + " channels, got " +
                             ndgrad::shape_string(x.shape()));
  Tensor h = ndgrad::relu(bn1.forward(conv1.forward(x), mode));
  h = ndgrad::relu(bn2.forward(conv2.forward(h), mode));
  h = bn3.forward(conv3.forward(h), mode);
  Tensor skip = has_projection ? projection_bn.forward(projection.forward(x), mode) : x;
  return ndgrad::add(h, skip);
}

void ResidualBlock::collect(const std::string& prefix, ndgrad::StateList& out) const {
  conv1.collect(prefix + ".conv1", out);
  bn1.collect(prefix + ".bn1", out);
  conv2.collect(prefix + ".conv2", out);
  bn2.collect(prefix + ".bn2", out);
  conv3.collect(prefix + ".conv3", out);
  bn3.collect(prefix + ".bn3", out);
  if (has_projection) {
    projection.collect(prefix + ".projection", out);
    projection_bn.collect(prefix + ".projection_bn", out);
  }
}

void ExtractorConfig::validate() const {
  if (blocks < 1) throw std::invalid_argument("extractor needs at least one residual block");
  if (base_width < 1) throw std::invalid_argument("extractor base_width must be >= 1");
  if (widen_every < 1) throw std::invalid_argument("extractor widen_every must be >= 1");
  if (!(dropout >= 0 && dropout < 1)) throw std::invalid_argument("extractor dropout must be in [0, 1)");
}

FeatureExtractor build_feature_extractor(std::size_t input_features, const ExtractorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (input_features < 1) throw std::invalid_argument("extractor needs at least one input feature");
  Rng rng(derive_seed(seed, "resfeat-init"));
  FeatureExtractor f;
  f.input_features = input_features;
  f.dropout = cfg.dropout;
  f.stem = ndgrad::Conv1d::create(1, cfg.base_width, 3, 1, 1, false, rng);
  f.stem_bn = ndgrad::BatchNorm1d::create(cfg.base_width);
  std::size_t width = cfg.base_width;
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    std::size_t out = width, stride = 1;
    if (b > 0 && b % cfg.widen_every == 0) {
      out = width * 2;
      stride = 2;
    }
    f.blocks.push_back(ResidualBlock::create(width, out, stride, rng));
    width = out;
  }
  f.feature_dim = cfg.feature_dim == 0 ? width : cfg.feature_dim;
  if (f.feature_dim != width) f.projection = ndgrad::Dense::create(width, f.feature_dim, rng);
  return f;
}

Tensor FeatureExtractor::forward(const Tensor& x, Mode mode, Rng& rng) const {
  if (x.rank() != 2 || x.dim(1) != input_features)
    throw ndgrad::ShapeError("feature extractor built for " + std::to_string(input_features) +
                             " features, got " + ndgrad::shape_string(x.shape()));
  const std::size_t batch = x.dim(0);
  Tensor h = ndgrad::reshape(x, {batch, 1, input_features});
  h = ndgrad::relu(stem_bn.forward(stem.forward(h), mode));
  for (const auto& b : blocks) h = b.forward(h, mode);
  h = ndgrad::pool1d(h, ndgrad::PoolKind::global_average);
  h = ndgrad::reshape(h, {batch, h.dim(1)});
  if (projection) h = projection->forward(h);
  return ndgrad::dropout(h, dropout, mode, rng);
}

ndgrad::StateList FeatureExtractor::state() const {
  ndgrad::StateList s;
  stem.collect("resfeat.stem", s);
  stem_bn.collect("resfeat.stem_bn", s);
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect("resfeat.block" + std::to_string(i), s);
  if (projection) projection->collect("resfeat.projection", s);
  return s;
}

ExtractorTraining train_feature_extractor(FeatureExtractor& f, const Matrix& x, std::span<const int> labels,
                                          std::size_t n_classes, const SoftmaxTrainOptions& opts) {
  if (f.frozen) throw std::logic_error("feature extractor is frozen");
  if (x.cols != f.input_features)
    throw ndgrad::ShapeError("training rows have " + std::to_string(x.cols) + " features, extractor expects " +
                             std::to_string(f.input_features));
  std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw std::invalid_argument("feature extractor training needs at least two classes");
  if (n_classes < 2) throw std::invalid_argument("feature extractor training needs n_classes >= 2");

  ExtractorTraining out;
  if (opts.epochs > 0) {
    Rng head_rng(derive_seed(opts.seed, "resfeat-head"));
    ndgrad::Dense head = ndgrad::Dense::create(f.feature_dim, n_classes, head_rng);
    auto params = ndgrad::trainable_tensors(f.state());
    params.push_back(head.weight);
    params.push_back(head.bias);
    auto logits = [&](const Tensor& batch, Mode mode, Rng& rng) { return head.forward(f.forward(batch, mode, rng)); };
    out.trace = train_softmax(logits, params, x, labels, opts);
    out.head_train_accuracy = out.trace.back().accuracy;
  }
  f.frozen = true;
  return out;
}

ExtractorTraining train_feature_extractor(FeatureExtractor& f, const flowdata::Dataset& train,
                                          const SoftmaxTrainOptions& opts) {
  return train_feature_extractor(f, train.features, train.labels, train.class_names.size(), opts);
}

Matrix extract_features(const FeatureExtractor& f, const Matrix& x) {
  if (!f.frozen) throw std::logic_error("extract_features needs a frozen extractor");
  if (x.cols != f.input_features)
    throw ndgrad::ShapeError("rows have " + std::to_string(x.cols) + " features, extractor built for " +
                             std::to_string(f.input_features));
  Rng unused(0);
  return forward_rows([&](const Tensor& b) { return f.forward(b, Mode::eval, unused); }, x);
}

Matrix extract_features(const FeatureExtractor& f, const flowdata::Dataset& d) {
  return extract_features(f, d.features);
}

}  // namespace ddosnet::resfeat
