#include "ddosnet/ndgrad/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace ddosnet::ndgrad {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

using detail::NodePtr;

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

bool wants_grad(const NodePtr& n) { return n && n->requires_grad; }

void accumulate(const NodePtr& n, const std::vector<double>& delta) {
  auto& g = n->grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

// Column layout: row (c*k + t), column (b*out_len + o) holds
// x[b, c, o*stride + t - padding], zero outside the signal.
std::vector<double> im2col(std::span<const double> x, std::size_t batch, std::size_t channels,
                           std::size_t length, std::size_t k, std::size_t stride,
                           std::size_t padding, std::size_t out_len) {
  const std::size_t cols = batch * out_len;
  std::vector<double> col(channels * k * cols, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < k; ++t) {
      double* row = col.data() + (c * k + t) * cols;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* src = x.data() + (b * channels + c) * length;
        double* dst = row + b * out_len;
        for (std::size_t o = 0; o < out_len; ++o) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(o * stride + t) -
                                     static_cast<std::ptrdiff_t>(padding);
          if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(length)) dst[o] = src[pos];
        }
      }
    }
  }
  return col;
}

void col2im(const double* col, std::size_t batch, std::size_t channels, std::size_t length,
            std::size_t k, std::size_t stride, std::size_t padding, std::size_t out_len,
            double* x) {
  const std::size_t cols = batch * out_len;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < k; ++t) {
      const double* row = col + (c * k + t) * cols;
      for (std::size_t b = 0; b < batch; ++b) {
        double* dst = x + (b * channels + c) * length;
        const double* src = row + b * out_len;
        for (std::size_t o = 0; o < out_len; ++o) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(o * stride + t) -
                                     static_cast<std::ptrdiff_t>(padding);
          if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(length)) dst[pos] += src[o];
        }
      }
    }
  }
}

// [batch, channels, length] <-> (channels x batch*length)
std::vector<double> to_channel_major(std::span<const double> x, std::size_t batch,
                                     std::size_t channels, std::size_t length) {
  std::vector<double> m(x.size());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c)
      std::copy_n(x.data() + (b * channels + c) * length, length,
                  m.data() + c * batch * length + b * length);
  return m;
}

std::vector<double> from_channel_major(const double* m, std::size_t batch, std::size_t channels,
                                       std::size_t length) {
  std::vector<double> x(batch * channels * length);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c)
      std::copy_n(m + c * batch * length + b * length, length,
                  x.data() + (b * channels + c) * length);
  return x;
}

void check_bias(const Tensor& bias, std::size_t channels, const char* op) {
  if (!bias.defined()) return;
  require(bias.rank() == 1 && bias.dim(0) == channels,
          std::string(op) + ": bias shape " + shape_string(bias.shape()) + " does not match " +
              std::to_string(channels) + " output channels");
}

}  // namespace

// ---- structural -----------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  require(shape_size(shape) == x.size(),
          "reshape " + shape_string(x.shape()) + " -> " + shape_string(shape));
  std::vector<double> data(x.data().begin(), x.data().end());
  NodePtr xn = x.node_ptr();
  return Tensor::make_result(std::move(shape), std::move(data), {x},
                             [xn](const std::vector<double>& g) { accumulate(xn, g); });
}

Tensor narrow_last(const Tensor& x, std::size_t start, std::size_t length) {
  require(x.rank() >= 1, "narrow_last on a scalar");
  const std::size_t full = x.shape().back();
  require(start + length <= full, "narrow_last range exceeds axis length");
  const std::size_t rows = x.size() / full;
  Shape shape = x.shape();
  shape.back() = length;
  std::vector<double> out(rows * length);
  auto src = x.data();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(src.data() + r * full + start, length, out.data() + r * length);
  NodePtr xn = x.node_ptr();
  return Tensor::make_result(std::move(shape), std::move(out), {x},
                             [xn, rows, full, start, length](const std::vector<double>& g) {
                               auto& gx = xn->grad_buffer();
                               for (std::size_t r = 0; r < rows; ++r)
                                 for (std::size_t i = 0; i < length; ++i)
                                   gx[r * full + start + i] += g[r * length + i];
                             });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(),
          "add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  std::vector<double> out(a.size());
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  NodePtr an = a.node_ptr();
  NodePtr bn = b.node_ptr();
  return Tensor::make_result(a.shape(), std::move(out), {a, b},
                             [an, bn](const std::vector<double>& g) {
                               if (wants_grad(an)) accumulate(an, g);
                               if (wants_grad(bn)) accumulate(bn, g);
                             });
}

Tensor affine(const Tensor& x, double scale, double shift) {
  std::vector<double> out(x.size());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * xd[i] + shift;
  NodePtr xn = x.node_ptr();
  return Tensor::make_result(x.shape(), std::move(out), {x},
                             [xn, scale](const std::vector<double>& g) {
                               auto& gx = xn->grad_buffer();
                               for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += scale * g[i];
                             });
}

Tensor mean(const Tensor& x) {
  require(x.size() > 0, "mean of an empty tensor");
  double s = 0.0;
  for (double v : x.data()) s += v;
  const double n = static_cast<double>(x.size());
  NodePtr xn = x.node_ptr();
  return Tensor::make_result({1}, {s / n}, {x}, [xn, n](const std::vector<double>& g) {
    auto& gx = xn->grad_buffer();
    for (double& v : gx) v += g[0] / n;
  });
}

// ---- convolution ----------------------------------------------------------

Tensor conv1d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding,
              const Tensor& bias) {
  require(input.rank() == 3, "conv1d: input must be [batch, channels, length], got " +
                                 shape_string(input.shape()));
  require(kernel.rank() == 3, "conv1d: kernel must be [c_out, c_in, k]");
  require(stride >= 1, "conv1d: stride must be >= 1");
  const std::size_t batch = input.dim(0), c_in = input.dim(1), length = input.dim(2);
  const std::size_t c_out = kernel.dim(0), k = kernel.dim(2);
  require(kernel.dim(1) == c_in, "conv1d: kernel expects " + std::to_string(kernel.dim(1)) +
                                     " input channels, input has " + std::to_string(c_in));
  require(k >= 1 && k <= length + 2 * padding, "conv1d: kernel longer than padded input");
  check_bias(bias, c_out, "conv1d");
  const std::size_t out_len = (length + 2 * padding - k) / stride + 1;
  const std::size_t cols = batch * out_len;

  auto col = std::make_shared<std::vector<double>>(
      im2col(input.data(), batch, c_in, length, k, stride, padding, out_len));
  MatR y = CMapR(kernel.data().data(), c_out, c_in * k) * CMapR(col->data(), c_in * k, cols);
  if (bias.defined()) {
    auto bd = bias.data();
    for (std::size_t c = 0; c < c_out; ++c) y.row(c).array() += bd[c];
  }
  std::vector<double> out = from_channel_major(y.data(), batch, c_out, out_len);

  NodePtr xn = input.node_ptr(), wn = kernel.node_ptr(), bn = bias.node_ptr();
  return Tensor::make_result(
      {batch, c_out, out_len}, std::move(out), {input, kernel, bias},
      [=](const std::vector<double>& g) {
        std::vector<double> gy = to_channel_major(g, batch, c_out, out_len);
        CMapR dy(gy.data(), c_out, cols);
        if (wants_grad(wn)) {
          MatR dw = dy * CMapR(col->data(), c_in * k, cols).transpose();
          auto& gw = wn->grad_buffer();
          for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += dw.data()[i];
        }
        if (wants_grad(bn)) {
          auto& gb = bn->grad_buffer();
          for (std::size_t c = 0; c < c_out; ++c) gb[c] += dy.row(c).sum();
        }
        if (wants_grad(xn)) {
          MatR dcol = CMapR(wn->data.data(), c_out, c_in * k).transpose() * dy;
          col2im(dcol.data(), batch, c_in, length, k, stride, padding, out_len,
                 xn->grad_buffer().data());
        }
      });
}

Tensor conv_transpose1d(const Tensor& input, const Tensor& kernel, std::size_t stride,
                        std::size_t padding, std::size_t output_padding, const Tensor& bias) {
  require(input.rank() == 3, "conv_transpose1d: input must be [batch, channels, length]");
  require(kernel.rank() == 3, "conv_transpose1d: kernel must be [c_in, c_out, k]");
  require(stride >= 1, "conv_transpose1d: stride must be >= 1");
  require(output_padding < stride, "conv_transpose1d: output_padding must be < stride");
  const std::size_t batch = input.dim(0), c_in = input.dim(1), length = input.dim(2);
  const std::size_t c_out = kernel.dim(1), k = kernel.dim(2);
  require(kernel.dim(0) == c_in, "conv_transpose1d: kernel/input channel mismatch");
  check_bias(bias, c_out, "conv_transpose1d");
  const std::ptrdiff_t signed_len = static_cast<std::ptrdiff_t>((length - 1) * stride + k +
                                                                output_padding) -
                                    static_cast<std::ptrdiff_t>(2 * padding);
  require(signed_len >= 1, "conv_transpose1d: non-positive output length");
  const std::size_t out_len = static_cast<std::size_t>(signed_len);
  const std::size_t cols = batch * length;

  auto xm = std::make_shared<std::vector<double>>(
      to_channel_major(input.data(), batch, c_in, length));
  MatR col = CMapR(kernel.data().data(), c_in, c_out * k).transpose() *
             CMapR(xm->data(), c_in, cols);
  std::vector<double> out(batch * c_out * out_len, 0.0);
  col2im(col.data(), batch, c_out, out_len, k, stride, padding, length, out.data());
  if (bias.defined()) {
    auto bd = bias.data();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t c = 0; c < c_out; ++c)
        for (std::size_t o = 0; o < out_len; ++o) out[(b * c_out + c) * out_len + o] += bd[c];
  }

  NodePtr xn = input.node_ptr(), wn = kernel.node_ptr(), bn = bias.node_ptr();
  return Tensor::make_result(
      {batch, c_out, out_len}, std::move(out), {input, kernel, bias},
      [=](const std::vector<double>& g) {
        std::vector<double> dcol = im2col(g, batch, c_out, out_len, k, stride, padding, length);
        CMapR dc(dcol.data(), c_out * k, cols);
        if (wants_grad(wn)) {
          MatR dw = CMapR(xm->data(), c_in, cols) * dc.transpose();
          auto& gw = wn->grad_buffer();
          for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += dw.data()[i];
        }
        if (wants_grad(bn)) {
          auto& gb = bn->grad_buffer();
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t c = 0; c < c_out; ++c)
              for (std::size_t o = 0; o < out_len; ++o) gb[c] += g[(b * c_out + c) * out_len + o];
        }
        if (wants_grad(xn)) {
          MatR dx = CMapR(wn->data.data(), c_in, c_out * k) * dc;
          std::vector<double> dxs = from_channel_major(dx.data(), batch, c_in, length);
          accumulate(xn, dxs);
        }
      });
}

// ---- normalization --------------------------------------------------------

RunningStats RunningStats::identity(std::size_t channels) {
  return RunningStats{Tensor::zeros({channels}), Tensor::full({channels}, 1.0), 0.1};
}

Tensor batch_norm1d(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                    RunningStats& stats, Mode mode, double epsilon) {
  require(input.rank() >= 2, "batch_norm1d: input needs a channel axis");
  const std::size_t batch = input.dim(0), channels = input.dim(1);
  const std::size_t inner = input.size() / (batch * channels);
  require(gamma.size() == channels && beta.size() == channels,
          "batch_norm1d: gamma/beta length must equal channel count " + std::to_string(channels));
  require(stats.mean.size() == channels && stats.var.size() == channels,
          "batch_norm1d: running stats length mismatch");
  const double count = static_cast<double>(batch * inner);
  auto x = input.data();
  auto gd = gamma.data();
  auto bd = beta.data();

  auto index = [=](std::size_t b, std::size_t c, std::size_t i) {
    return (b * channels + c) * inner + i;
  };

  std::vector<double> mu(channels), inv_std(channels);
  if (mode == Mode::train) {
    auto rm = stats.mean.mutable_data();
    auto rv = stats.var.mutable_data();
    for (std::size_t c = 0; c < channels; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < inner; ++i) s += x[index(b, c, i)];
      const double m = s / count;
      double ss = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < inner; ++i) {
          const double d = x[index(b, c, i)] - m;
          ss += d * d;
        }
      const double var = ss / count;
      mu[c] = m;
      inv_std[c] = 1.0 / std::sqrt(var + epsilon);
      const double unbiased = count > 1.0 ? ss / (count - 1.0) : var;
      rm[c] = (1.0 - stats.momentum) * rm[c] + stats.momentum * m;
      rv[c] = (1.0 - stats.momentum) * rv[c] + stats.momentum * unbiased;
    }
  } else {
    auto rm = stats.mean.data();
    auto rv = stats.var.data();
    for (std::size_t c = 0; c < channels; ++c) {
      mu[c] = rm[c];
      inv_std[c] = 1.0 / std::sqrt(rv[c] + epsilon);
    }
  }

  auto xhat = std::make_shared<std::vector<double>>(input.size());
  std::vector<double> out(input.size());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t j = index(b, c, i);
        (*xhat)[j] = (x[j] - mu[c]) * inv_std[c];
        out[j] = gd[c] * (*xhat)[j] + bd[c];
      }

  NodePtr xn = input.node_ptr(), gn = gamma.node_ptr(), bn = beta.node_ptr();
  const bool batch_stats = mode == Mode::train;
  return Tensor::make_result(
      input.shape(), std::move(out), {input, gamma, beta},
      [=](const std::vector<double>& g) {
        std::vector<double> sum_g(channels, 0.0), sum_gx(channels, 0.0);
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t i = 0; i < inner; ++i) {
              const std::size_t j = index(b, c, i);
              sum_g[c] += g[j];
              sum_gx[c] += g[j] * (*xhat)[j];
            }
        if (wants_grad(gn)) {
          auto& gg = gn->grad_buffer();
          for (std::size_t c = 0; c < channels; ++c) gg[c] += sum_gx[c];
        }
        if (wants_grad(bn)) {
          auto& gb = bn->grad_buffer();
          for (std::size_t c = 0; c < channels; ++c) gb[c] += sum_g[c];
        }
        if (wants_grad(xn)) {
          auto& gx = xn->grad_buffer();
          const auto& gam = gn->data;
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t c = 0; c < channels; ++c)
              for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t j = index(b, c, i);
                if (batch_stats) {
                  gx[j] += gam[c] * inv_std[c] *
                           (g[j] - sum_g[c] / count - (*xhat)[j] * sum_gx[c] / count);
                } else {
                  gx[j] += gam[c] * inv_std[c] * g[j];
                }
              }
        }
      });
}

Tensor lrn(const Tensor& input, const LrnParams& params) {
  require(input.rank() == 3, "lrn: input must be [batch, channels, length]");
  require(params.window >= 1, "lrn: window must be >= 1");
  require(params.z > 0.0, "lrn: z must be positive");
  const std::size_t batch = input.dim(0), channels = input.dim(1), length = input.dim(2);
  const std::size_t half = params.window / 2;
  auto x = input.data();
  auto denom = std::make_shared<std::vector<double>>(input.size());
  std::vector<double> out(input.size());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t l = 0; l < length; ++l)
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t lo = c >= half ? c - half : 0;
        const std::size_t hi = std::min(channels - 1, c + half);
        double s = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) {
          const double v = x[(b * channels + j) * length + l];
          s += v * v;
        }
        const std::size_t idx = (b * channels + c) * length + l;
        (*denom)[idx] = params.z + params.alpha * s;
        out[idx] = x[idx] * std::pow((*denom)[idx], -params.exponent);
      }
  NodePtr xn = input.node_ptr();
  const double alpha = params.alpha, expo = params.exponent;
  return Tensor::make_result(
      input.shape(), std::move(out), {input}, [=](const std::vector<double>& g) {
        auto& gx = xn->grad_buffer();
        const auto& xv = xn->data;
        // t_x = g_x * b_x * S_x^(-expo-1), shared by every k in window(x).
        std::vector<double> t(xv.size());
        for (std::size_t i = 0; i < xv.size(); ++i)
          t[i] = g[i] * xv[i] * std::pow((*denom)[i], -expo - 1.0);
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t l = 0; l < length; ++l)
            for (std::size_t k = 0; k < channels; ++k) {
              const std::size_t idx = (b * channels + k) * length + l;
              const std::size_t lo = k >= half ? k - half : 0;
              const std::size_t hi = std::min(channels - 1, k + half);
              double cross = 0.0;
              for (std::size_t x2 = lo; x2 <= hi; ++x2) cross += t[(b * channels + x2) * length + l];
              gx[idx] += g[idx] * std::pow((*denom)[idx], -expo) -
                         2.0 * alpha * expo * xv[idx] * cross;
            }
      });
}

// ---- elementwise ----------------------------------------------------------

Tensor activation(const Tensor& x, ActivationKind kind, double slope) {
  auto xd = x.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = xd[i];
    switch (kind) {
      case ActivationKind::relu: out[i] = v > 0.0 ? v : 0.0; break;
      case ActivationKind::leaky_relu: out[i] = v > 0.0 ? v : slope * v; break;
      case ActivationKind::tanh: out[i] = std::tanh(v); break;
      case ActivationKind::sigmoid:
        out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        break;
    }
  }
  NodePtr xn = x.node_ptr();
  // The closure keeps the output values it needs for tanh and sigmoid.
  auto saved = std::make_shared<std::vector<double>>(
      kind == ActivationKind::tanh || kind == ActivationKind::sigmoid ? out : std::vector<double>{});
  return Tensor::make_result(x.shape(), std::move(out), {x},
                             [xn, kind, slope, saved](const std::vector<double>& g) {
                               auto& gx = xn->grad_buffer();
                               const auto& xv = xn->data;
                               for (std::size_t i = 0; i < gx.size(); ++i) {
                                 double d = 0.0;
                                 switch (kind) {
                                   case ActivationKind::relu: d = xv[i] > 0.0 ? 1.0 : 0.0; break;
                                   case ActivationKind::leaky_relu: d = xv[i] > 0.0 ? 1.0 : slope; break;
                                   case ActivationKind::tanh: d = 1.0 - (*saved)[i] * (*saved)[i]; break;
                                   case ActivationKind::sigmoid: d = (*saved)[i] * (1.0 - (*saved)[i]); break;
                                 }
                                 gx[i] += d * g[i];
                               }
                             });
}

Tensor neg_log(const Tensor& x, double floor) {
  auto xd = x.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = -std::log(std::max(xd[i], floor));
  NodePtr xn = x.node_ptr();
  return Tensor::make_result(x.shape(), std::move(out), {x}, [xn, floor](const std::vector<double>& g) {
    auto& gx = xn->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (xn->data[i] > floor) gx[i] -= g[i] / xn->data[i];
  });
}

Tensor neg_log1m(const Tensor& x, double floor) {
  auto xd = x.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = -std::log(std::max(1.0 - xd[i], floor));
  NodePtr xn = x.node_ptr();
  return Tensor::make_result(x.shape(), std::move(out), {x}, [xn, floor](const std::vector<double>& g) {
    auto& gx = xn->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double q = 1.0 - xn->data[i];
      if (q > floor) gx[i] += g[i] / q;
    }
  });
}

// ---- pooling --------------------------------------------------------------

Tensor pool1d(const Tensor& input, PoolKind kind, std::size_t window, std::size_t stride) {
  require(input.rank() >= 2, "pool1d: input needs a length axis");
  const std::size_t length = input.shape().back();
  const std::size_t rows = input.size() / length;
  if (kind == PoolKind::global_average) {
    window = length;
    stride = length;
  }
  require(window >= 1 && window <= length,
          "pool1d: window " + std::to_string(window) + " invalid for length " + std::to_string(length));
  require(stride >= 1, "pool1d: stride must be >= 1");
  const std::size_t out_len = (length - window) / stride + 1;
  Shape shape = input.shape();
  shape.back() = out_len;
  auto x = input.data();
  std::vector<double> out(rows * out_len);
  auto argmax = std::make_shared<std::vector<std::size_t>>();
  if (kind == PoolKind::max) argmax->resize(out.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < out_len; ++o) {
      const double* w = x.data() + r * length + o * stride;
      if (kind == PoolKind::max) {
        std::size_t best = 0;
        for (std::size_t t = 1; t < window; ++t)
          if (w[t] > w[best]) best = t;
        out[r * out_len + o] = w[best];
        (*argmax)[r * out_len + o] = r * length + o * stride + best;
      } else {
        double s = 0.0;
        for (std::size_t t = 0; t < window; ++t) s += w[t];
        out[r * out_len + o] = s / static_cast<double>(window);
      }
    }
  NodePtr xn = input.node_ptr();
  return Tensor::make_result(std::move(shape), std::move(out), {input},
                             [=](const std::vector<double>& g) {
                               auto& gx = xn->grad_buffer();
                               if (kind == PoolKind::max) {
                                 for (std::size_t i = 0; i < g.size(); ++i) gx[(*argmax)[i]] += g[i];
                                 return;
                               }
                               const double scale = 1.0 / static_cast<double>(window);
                               for (std::size_t r = 0; r < rows; ++r)
                                 for (std::size_t o = 0; o < out_len; ++o)
                                   for (std::size_t t = 0; t < window; ++t)
                                     gx[r * length + o * stride + t] += g[r * out_len + o] * scale;
                             });
}

// ---- dense / heads --------------------------------------------------------

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require(input.rank() == 2, "dense: input must be [batch, in], got " + shape_string(input.shape()));
  require(weight.rank() == 2, "dense: weight must be [out, in]");
  const std::size_t batch = input.dim(0), in = input.dim(1), out_dim = weight.dim(0);
  require(weight.dim(1) == in, "dense: weight expects " + std::to_string(weight.dim(1)) +
                                   " inputs, got " + std::to_string(in));
  require(bias.defined() && bias.rank() == 1 && bias.dim(0) == out_dim, "dense: bias must be [out]");
  MatR y = CMapR(input.data().data(), batch, in) * CMapR(weight.data().data(), out_dim, in).transpose();
  auto bd = bias.data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out_dim; ++o) y(b, o) += bd[o];
  std::vector<double> out(y.data(), y.data() + y.size());
  NodePtr xn = input.node_ptr(), wn = weight.node_ptr(), bn = bias.node_ptr();
  return Tensor::make_result({batch, out_dim}, std::move(out), {input, weight, bias},
                             [=](const std::vector<double>& g) {
                               CMapR dy(g.data(), batch, out_dim);
                               if (wants_grad(xn)) {
                                 MapR(xn->grad_buffer().data(), batch, in) +=
                                     dy * CMapR(wn->data.data(), out_dim, in);
                               }
                               if (wants_grad(wn)) {
                                 MapR(wn->grad_buffer().data(), out_dim, in) +=
                                     dy.transpose() * CMapR(xn->data.data(), batch, in);
                               }
                               if (wants_grad(bn)) {
                                 auto& gb = bn->grad_buffer();
                                 for (std::size_t o = 0; o < out_dim; ++o) gb[o] += dy.col(o).sum();
                               }
                             });
}

Tensor dropout(const Tensor& input, double rate, Mode mode, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (mode == Mode::eval || rate == 0.0) return input;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(input.size());
  for (double& m : *mask) m = u(rng) < rate ? 0.0 : keep_scale;
  auto x = input.data();
  std::vector<double> out(input.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * (*mask)[i];
  NodePtr xn = input.node_ptr();
  return Tensor::make_result(input.shape(), std::move(out), {input},
                             [xn, mask](const std::vector<double>& g) {
                               auto& gx = xn->grad_buffer();
                               for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * (*mask)[i];
                             });
}

std::vector<double> softmax_rows(std::span<const double> logits, std::size_t classes) {
  std::vector<double> p(logits.size());
  const std::size_t rows = classes ? logits.size() / classes : 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = logits.data() + r * classes;
    const double m = *std::max_element(z, z + classes);
    double s = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      p[r * classes + c] = std::exp(z[c] - m);
      s += p[r * classes + c];
    }
    for (std::size_t c = 0; c < classes; ++c) p[r * classes + c] /= s;
  }
  return p;
}

CrossEntropy softmax_cross_entropy(const Tensor& logits, std::span<const int> targets) {
  require(logits.rank() == 2, "softmax_cross_entropy: logits must be [batch, classes]");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  require(targets.size() == batch, "softmax_cross_entropy: target count mismatch");
  for (int t : targets)
    if (t < 0 || static_cast<std::size_t>(t) >= classes)
      throw std::out_of_range("softmax_cross_entropy: class index out of range");
  auto z = logits.data();
  auto probs = std::make_shared<std::vector<double>>(softmax_rows(z, classes));
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = z.data() + b * classes;
    const double m = *std::max_element(row, row + classes);
    double s = 0.0;
    for (std::size_t c = 0; c < classes; ++c) s += std::exp(row[c] - m);
    loss += (m + std::log(s)) - row[targets[b]];
  }
  loss /= static_cast<double>(batch);
  std::vector<int> tgt(targets.begin(), targets.end());
  NodePtr zn = logits.node_ptr();
  Tensor loss_t = Tensor::make_result({1}, {loss}, {logits}, [=](const std::vector<double>& g) {
    auto& gz = zn->grad_buffer();
    const double scale = g[0] / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t c = 0; c < classes; ++c) {
        const double onehot = static_cast<int>(c) == tgt[b] ? 1.0 : 0.0;
        gz[b * classes + c] += ((*probs)[b * classes + c] - onehot) * scale;
      }
  });
  return CrossEntropy{loss_t, Tensor({batch, classes}, *probs)};
}

}  // namespace ddosnet::ndgrad
