#include "ddosnet/gan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ddosnet/log.hpp"

namespace ddosnet::gan {

using ndgrad::Mode;
using ndgrad::Tensor;

void GanConfig::validate() const {
  if (noise_dim < 1) throw std::invalid_argument("gan noise_dim must be >= 1");
  if (epochs < 1) throw std::invalid_argument("gan epochs must be >= 1");
  if (generator_widths.size() < 2) throw std::invalid_argument("gan generator_widths needs at least 2 entries");
  if (discriminator_widths.empty()) throw std::invalid_argument("gan discriminator_widths must not be empty");
  for (auto w : generator_widths)
    if (w < 1) throw std::invalid_argument("gan widths must be positive");
  for (auto w : discriminator_widths)
    if (w < 1) throw std::invalid_argument("gan widths must be positive");
  if (!(learning_rate > 0)) throw std::invalid_argument("gan learning_rate must be positive");
  if (!(momentum >= 0 && momentum < 1)) throw std::invalid_argument("gan momentum must be in [0, 1)");
  if (batch_size < 2) throw std::invalid_argument("gan batch_size must be >= 2");
}

// ---- networks ---------------------------------------------------------------

Tensor Generator::forward(const Tensor& z, Mode mode) const {
  const std::size_t batch = z.dim(0);
  Tensor h = stem.forward(z);
  h = ndgrad::reshape(h, {batch, stem_norm.gamma.size(), base_length});
  h = ndgrad::leaky_relu(stem_norm.forward(h, mode), slope);
  for (std::size_t i = 0; i < up.size(); ++i) h = ndgrad::leaky_relu(up_norm[i].forward(up[i].forward(h), mode), slope);
  h = ndgrad::tanh(out.forward(h));
  h = ndgrad::narrow_last(h, 0, features);
  h = ndgrad::reshape(h, {batch, features});
  return ndgrad::affine(h, 0.5, 0.5);
}

void Generator::collect(const std::string& prefix, ndgrad::StateList& state) const {
  stem.collect(prefix + "stem", state);
  stem_norm.collect(prefix + "stem_norm", state);
  for (std::size_t i = 0; i < up.size(); ++i) {
    up[i].collect(prefix + "up" + std::to_string(i), state);
    up_norm[i].collect(prefix + "up_norm" + std::to_string(i), state);
  }
  out.collect(prefix + "out", state);
}

Tensor Discriminator::forward(const Tensor& x, Mode mode) const {
  const std::size_t batch = x.dim(0);
  Tensor h = ndgrad::reshape(x, {batch, 1, features});
  for (std::size_t i = 0; i < convs.size(); ++i) {
    h = convs[i].forward(h);
    if (i > 0) h = norms[i - 1].forward(h, mode);
    h = ndgrad::leaky_relu(h, slope);
  }
  h = ndgrad::pool1d(out.forward(h), ndgrad::PoolKind::global_average);
  return ndgrad::sigmoid(ndgrad::reshape(h, {batch}));
}

void Discriminator::collect(const std::string& prefix, ndgrad::StateList& state) const {
  for (std::size_t i = 0; i < convs.size(); ++i) {
    convs[i].collect(prefix + "conv" + std::to_string(i), state);
    if (i > 0) norms[i - 1].collect(prefix + "norm" + std::to_string(i), state);
  }
  out.collect(prefix + "out", state);
}

ndgrad::StateList GanPair::state() const {
  ndgrad::StateList s;
  generator.collect("generator.", s);
  discriminator.collect("discriminator.", s);
  return s;
}

GanPair make_gan(std::size_t features, const GanConfig& cfg) {
  cfg.validate();
  if (features < 1) throw std::invalid_argument("gan needs at least one feature");
  Rng rng(derive_seed(cfg.seed, "gan-init"));
  GanPair g;

  auto& gen = g.generator;
  const auto& gw = cfg.generator_widths;
  const std::size_t stages = gw.size() - 1;
  std::size_t scale = std::size_t{1} << stages;
  gen.features = features;
  gen.slope = cfg.leaky_slope;
  gen.base_length = (features + scale - 1) / scale;
  gen.stem = ndgrad::Dense::create(cfg.noise_dim, gw[0] * gen.base_length, rng);
  gen.stem_norm = ndgrad::BatchNorm1d::create(gw[0]);
  for (std::size_t i = 0; i < stages; ++i) {
    gen.up.push_back(ndgrad::ConvTranspose1d::create(gw[i], gw[i + 1], 4, 2, 1, false, rng));
    gen.up_norm.push_back(ndgrad::BatchNorm1d::create(gw[i + 1]));
  }
  gen.out = ndgrad::Conv1d::create(gw.back(), 1, 3, 1, 1, true, rng);

  auto& dis = g.discriminator;
  dis.features = features;
  dis.slope = cfg.leaky_slope;
  std::size_t c_in = 1;
  for (std::size_t i = 0; i < cfg.discriminator_widths.size(); ++i) {
    std::size_t c_out = cfg.discriminator_widths[i];
    dis.convs.push_back(ndgrad::Conv1d::create(c_in, c_out, 3, 2, 1, i == 0, rng));
    if (i > 0) dis.norms.push_back(ndgrad::BatchNorm1d::create(c_out));
    c_in = c_out;
  }
  dis.out = ndgrad::Conv1d::create(c_in, 1, 3, 1, 1, true, rng);

  auto gp = ndgrad::StateList{};
  gen.collect("", gp);
  g.generator_sgd = ndgrad::make_sgd_state(ndgrad::trainable_tensors(gp), cfg.learning_rate, cfg.momentum, 0.0);
  auto dp = ndgrad::StateList{};
  dis.collect("", dp);
  g.discriminator_sgd = ndgrad::make_sgd_state(ndgrad::trainable_tensors(dp), cfg.learning_rate, cfg.momentum, 0.0);
  g.batch_size = cfg.batch_size;
  return g;
}

Tensor generator_forward(const GanPair& g, const Tensor& z, Mode mode) { return g.generator.forward(z, mode); }

Tensor discriminator_forward(const GanPair& g, const Tensor& x, Mode mode) {
  return g.discriminator.forward(x, mode);
}

// ---- losses -----------------------------------------------------------------

Tensor generator_loss(const Tensor& d_of_fake) { return ndgrad::mean(ndgrad::neg_log(d_of_fake)); }

Tensor discriminator_loss(const Tensor& d_of_real, const Tensor& d_of_fake) {
  return ndgrad::add(ndgrad::mean(ndgrad::neg_log(d_of_real)), ndgrad::mean(ndgrad::neg_log1m(d_of_fake)));
}

double generator_loss(std::span<const double> d_of_fake) {
  return generator_loss(Tensor({d_of_fake.size()}, {d_of_fake.begin(), d_of_fake.end()})).item();
}

double discriminator_loss(std::span<const double> d_of_real, std::span<const double> d_of_fake) {
  return discriminator_loss(Tensor({d_of_real.size()}, {d_of_real.begin(), d_of_real.end()}),
                            Tensor({d_of_fake.size()}, {d_of_fake.begin(), d_of_fake.end()}))
      .item();
}

// ---- training -----------------------------------------------------------------

namespace {

Tensor noise(std::size_t batch, std::size_t dim, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> z(batch * dim);
  for (double& v : z) v = n(rng);
  return Tensor({batch, dim}, std::move(z));
}

Tensor gather(const Matrix& rows, std::span<const std::size_t> idx) {
  std::vector<double> out;
  out.reserve(idx.size() * rows.cols);
  for (auto i : idx) {
    auto r = rows.row(i);
    out.insert(out.end(), r.begin(), r.end());
  }
  return Tensor({idx.size(), rows.cols}, std::move(out));
}

void zero(std::vector<Tensor>& ps) {
  for (auto& p : ps) p.zero_grad();
}

}  // namespace

GanPair train_dcgan(const Matrix& rows, const GanConfig& cfg) {
  if (rows.rows < kMinGanRows)
    throw GanError("gan needs at least " + std::to_string(kMinGanRows) + " rows, got " + std::to_string(rows.rows));
  GanPair g = make_gan(rows.cols, cfg);
  g.batch_size = std::min(cfg.batch_size, std::max<std::size_t>(2, rows.rows / 2));

  ndgrad::StateList gs, ds;
  g.generator.collect("", gs);
  g.discriminator.collect("", ds);
  auto gparams = ndgrad::trainable_tensors(gs);
  auto dparams = ndgrad::trainable_tensors(ds);

  Rng rng(derive_seed(cfg.seed, "gan-train"));
  std::vector<std::size_t> order(rows.rows);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = g.batch_size;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double g_sum = 0.0, d_sum = 0.0;
    std::size_t batches = 0;
    // a trailing batch of one row would break batch norm, so it is dropped
    for (std::size_t start = 0; start + bs <= order.size(); start += bs) {
      Tensor real = gather(rows, std::span(order).subspan(start, bs));

      zero(dparams);
      Tensor fake = generator_forward(g, noise(bs, cfg.noise_dim, rng), Mode::train).detach();
      Tensor d_loss = discriminator_loss(discriminator_forward(g, real, Mode::train),
                                         discriminator_forward(g, fake, Mode::train));
      d_loss.backward();
      ndgrad::sgd_update(dparams, g.discriminator_sgd);

      zero(gparams);
      Tensor g_loss = generator_loss(
          discriminator_forward(g, generator_forward(g, noise(bs, cfg.noise_dim, rng), Mode::train), Mode::train));
      if (cfg.update_generator) {
        g_loss.backward();
        ndgrad::sgd_update(gparams, g.generator_sgd);
      }

      d_sum += d_loss.item();
      g_sum += g_loss.item();
      ++batches;
    }
    g.history.push_back({g_sum / static_cast<double>(batches), d_sum / static_cast<double>(batches)});
  }
  zero(gparams);
  zero(dparams);
  return g;
}

Matrix sample_rows(const GanPair& g, std::size_t n, Rng& rng) {
  const std::size_t f = g.generator.features;
  Matrix out{n, f, std::vector<double>(n * f)};
  const std::size_t chunk = 256;
  const std::size_t noise_dim = g.generator.stem.weight.dim(1);
  for (std::size_t start = 0; start < n; start += chunk) {
    std::size_t b = std::min(chunk, n - start);
    Tensor y = generator_forward(g, noise(b, noise_dim, rng), Mode::eval);
    auto v = y.data();
    for (std::size_t i = 0; i < v.size(); ++i) out.values[start * f + i] = std::clamp(v[i], 0.0, 1.0);
  }
  return out;
}

Matrix jitter_rows(const Matrix& rows, std::size_t n, double sigma, Rng& rng) {
  if (rows.rows == 0) throw GanError("cannot jitter an empty class");
  Matrix out{n, rows.cols, std::vector<double>(n * rows.cols)};
  std::uniform_int_distribution<std::size_t> pick(0, rows.rows - 1);
  std::normal_distribution<double> noise(0.0, sigma);
  for (std::size_t i = 0; i < n; ++i) {
    auto src = rows.row(pick(rng));
    for (std::size_t c = 0; c < rows.cols; ++c) out(i, c) = std::clamp(src[c] + noise(rng), 0.0, 1.0);
  }
  return out;
}

// ---- oversampling -------------------------------------------------------------

std::map<int, std::size_t> median_targets(const flowdata::Dataset& d) {
  auto counts = d.class_counts();
  std::vector<std::size_t> present;
  for (auto c : counts)
    if (c > 0) present.push_back(c);
  std::map<int, std::size_t> targets;
  if (present.empty()) return targets;
  std::nth_element(present.begin(), present.begin() + present.size() / 2, present.end());
  std::size_t med = present[present.size() / 2];
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] > 0 && counts[c] < med) targets[static_cast<int>(c)] = med;
  return targets;
}

AugmentResult oversample_minorities(const flowdata::Dataset& d, const std::map<int, std::size_t>& targets,
                                    const GanConfig& cfg) {
  AugmentResult result;
  result.data = d;
  result.synthetic.assign(d.rows(), false);
  auto counts = d.class_counts();

  for (const auto& [label, target] : targets) {
    if (label < 0 || static_cast<std::size_t>(label) >= counts.size())
      throw std::invalid_argument("augmentation target for unknown class " + std::to_string(label));
    std::size_t have = counts[static_cast<std::size_t>(label)];
    if (target < have)
      throw std::invalid_argument("augmentation target " + std::to_string(target) + " below current count " +
                                  std::to_string(have) + " for class " + d.class_names[label]);
    ClassAugmentation info;
    info.label = label;
    info.original = have;
    info.generated = target - have;
    if (info.generated == 0) {
      result.classes.push_back(info);
      continue;
    }

    std::vector<std::size_t> idx;
    for (std::size_t r = 0; r < d.rows(); ++r)
      if (d.labels[r] == label) idx.push_back(r);
    Matrix rows = flowdata::select_rows(d, idx).features;

    GanConfig class_cfg = cfg;
    class_cfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(label), 1);
    Rng sample_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(label), 2));
    Matrix fresh;
    if (rows.rows == 0) throw GanError("cannot oversample class '" + d.class_names[label] + "' with no rows");
    if (rows.rows < kMinGanRows) {
      log_warning("class '" + d.class_names[label] + "' has " + std::to_string(rows.rows) +
                  " rows; using duplicate-with-jitter oversampling instead of a GAN");
      info.method = AugmentMethod::jitter;
      fresh = jitter_rows(rows, info.generated, 0.01, sample_rng);
    } else {
      GanPair pair = train_dcgan(rows, class_cfg);
      info.history = pair.history;
      fresh = sample_rows(pair, info.generated, sample_rng);
    }
    result.data.features.values.insert(result.data.features.values.end(), fresh.values.begin(), fresh.values.end());
    result.data.features.rows += fresh.rows;
    result.data.labels.insert(result.data.labels.end(), fresh.rows, label);
    result.synthetic.insert(result.synthetic.end(), fresh.rows, true);
    result.classes.push_back(std::move(info));
  }
  return result;
}

}  // namespace ddosnet::gan
