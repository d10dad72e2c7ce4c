#include <cmath>
#include <numeric>

#include "ddosnet/ndgrad/gradcheck.hpp"
#include "ddosnet/ndgrad/layers.hpp"
#include "ddosnet/ndgrad/ops.hpp"
#include "ddosnet/ndgrad/sgd.hpp"
#include "doctest.h"

using namespace ddosnet;
using namespace ddosnet::ndgrad;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> d(shape_size(shape));
  for (double& v : d) v = u(rng);
  return Tensor(std::move(shape), std::move(d), grad);
}

// Keeps values at least `margin` away from zero so relu/max kinks are not
// straddled by the finite-difference step.
Tensor away_from_zero(Shape shape, Rng& rng, double margin = 0.05) {
  auto t = random_tensor(std::move(shape), rng);
  for (double& v : t.mutable_data())
    if (std::abs(v) < margin) v = v < 0 ? v - margin : v + margin;
  return t;
}

// Weighted sum so every output coordinate gets a distinct upstream gradient.
Tensor probe(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  auto w = random_tensor(y.shape(), rng, -1.0, 1.0, false);
  std::vector<double> prod(y.size());
  return mean(reshape(Tensor::make_result(y.shape(), [&] {
                        for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = y.data()[i] * w.data()[i];
                        return prod;
                      }(),
                                          {y},
                                          [yn = y.node_ptr(), w](const std::vector<double>& g) {
                                            auto& gy = yn->grad_buffer();
                                            for (std::size_t i = 0; i < gy.size(); ++i)
                                              gy[i] += g[i] * w.data()[i];
                                          }),
                      {y.size()}));
}

// Direct-definition convolution used as the oracle for the im2col path.
std::vector<double> naive_conv(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad) {
  const std::size_t B = x.dim(0), Ci = x.dim(1), L = x.dim(2), Co = w.dim(0), K = w.dim(2);
  const std::size_t Lo = (L + 2 * pad - K) / stride + 1;
  std::vector<double> y(B * Co * Lo, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < Co; ++o)
      for (std::size_t l = 0; l < Lo; ++l)
        for (std::size_t c = 0; c < Ci; ++c)
          for (std::size_t k = 0; k < K; ++k) {
            const long pos = static_cast<long>(l * stride + k) - static_cast<long>(pad);
            if (pos < 0 || pos >= static_cast<long>(L)) continue;
            y[(b * Co + o) * Lo + l] += w.at({o, c, k}) * x.at({b, c, static_cast<std::size_t>(pos)});
          }
  return y;
}

std::vector<double> naive_conv_transpose(const Tensor& x, const Tensor& w, std::size_t stride,
                                         std::size_t pad, std::size_t out_len) {
  const std::size_t B = x.dim(0), Ci = x.dim(1), L = x.dim(2), Co = w.dim(1), K = w.dim(2);
  std::vector<double> y(B * Co * out_len, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < Ci; ++c)
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t o = 0; o < Co; ++o)
          for (std::size_t k = 0; k < K; ++k) {
            const long pos = static_cast<long>(l * stride + k) - static_cast<long>(pad);
            if (pos < 0 || pos >= static_cast<long>(out_len)) continue;
            y[(b * Co + o) * out_len + pos] += x.at({b, c, l}) * w.at({c, o, k});
          }
  return y;
}

}  // namespace

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  Tensor t = Tensor::zeros({2, 3}, true);
  CHECK(t.size() == 6);
  CHECK_FALSE(t.has_grad());
  Tensor loss = mean(t);
  loss.backward();
  CHECK(t.has_grad());
  CHECK(t.grad()[0] == doctest::Approx(1.0 / 6.0));
  Tensor frozen = Tensor::zeros({2});
  mean(frozen).backward();
  CHECK_FALSE(frozen.has_grad());
}

TEST_CASE("conv1d hand case and identity") {
  Tensor x({1, 1, 4}, {1, 2, 3, 4});
  Tensor k({1, 1, 2}, {1, 1});
  auto y = conv1d(x, k, 1, 0);
  REQUIRE(y.shape() == Shape{1, 1, 3});
  CHECK(y.data()[0] == 3.0);
  CHECK(y.data()[1] == 5.0);
  CHECK(y.data()[2] == 7.0);

  auto id = conv1d(x, Tensor({1, 1, 1}, {1.0}), 1, 0);
  CHECK(std::equal(id.data().begin(), id.data().end(), x.data().begin()));

  auto zero = conv1d(x, Tensor::zeros({1, 1, 3}), 1, 1);
  for (double v : zero.data()) CHECK(v == 0.0);

  CHECK_THROWS_AS(conv1d(x, Tensor::zeros({1, 2, 3}), 1, 0), ShapeError);
  CHECK_THROWS_AS(conv1d(x, Tensor::zeros({1, 1, 7}), 1, 0), ShapeError);
}

TEST_CASE("conv paths agree with direct definitions") {
  Rng rng(7);
  for (std::size_t stride : {1u, 2u, 3u}) {
    for (std::size_t pad : {0u, 1u, 2u}) {
      auto x = random_tensor({2, 3, 9}, rng);
      auto w = random_tensor({4, 3, 3}, rng);
      auto y = conv1d(x, w, stride, pad);
      auto ref = naive_conv(x, w, stride, pad);
      REQUIRE(y.size() == ref.size());
      for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.data()[i] == doctest::Approx(ref[i]).epsilon(1e-12));

      auto wt = random_tensor({3, 4, 4}, rng);
      auto yt = conv_transpose1d(x, wt, stride, pad);
      auto reft = naive_conv_transpose(x, wt, stride, pad, yt.dim(2));
      CHECK(yt.dim(2) == (9 - 1) * stride + 4 - 2 * pad);
      for (std::size_t i = 0; i < reft.size(); ++i)
        CHECK(yt.data()[i] == doctest::Approx(reft[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("batch norm statistics") {
  Tensor x({3, 1}, {1, 2, 3});
  auto bn = BatchNorm1d::create(1);
  auto y = bn.forward(x, Mode::train);
  double m = 0, v = 0;
  for (double d : y.data()) m += d / 3.0;
  for (double d : y.data()) v += (d - m) * (d - m) / 3.0;
  CHECK(m == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(v == doctest::Approx(1.0).epsilon(1e-4));
  // running stats moved by momentum 0.1 toward (2, unbiased var 1)
  CHECK(bn.stats.mean.data()[0] == doctest::Approx(0.2));
  CHECK(bn.stats.var.data()[0] == doctest::Approx(1.0));

  bn.gamma.mutable_data()[0] = 2.0;
  bn.beta.mutable_data()[0] = 5.0;
  auto z = bn.forward(x, Mode::train);
  m = 0, v = 0;
  for (double d : z.data()) m += d / 3.0;
  for (double d : z.data()) v += (d - m) * (d - m) / 3.0;
  CHECK(m == doctest::Approx(5.0));
  CHECK(std::sqrt(v) == doctest::Approx(2.0).epsilon(1e-4));

  auto e1 = bn.forward(x, Mode::eval);
  auto e2 = bn.forward(x, Mode::eval);
  CHECK(std::equal(e1.data().begin(), e1.data().end(), e2.data().begin()));

  // Single sample, zero variance: epsilon keeps the output finite.
  auto bn1 = BatchNorm1d::create(2);
  auto one = bn1.forward(Tensor({1, 2, 1}, {3.0, -1.0}), Mode::train);
  for (double d : one.data()) CHECK(std::isfinite(d));
}

TEST_CASE("lrn scalar values") {
  Tensor x({1, 1, 1}, {1.0});
  auto y = lrn(x, {2.0, 5, 1e-4, 0.75});
  CHECK(y.item() == doctest::Approx(1.0 / std::pow(2.0 + 1e-4, 0.75)).epsilon(1e-14));

  Rng rng(3);
  auto b = random_tensor({2, 6, 3}, rng);
  auto no_alpha = lrn(b, {3.0, 5, 0.0, 0.6});
  for (std::size_t i = 0; i < b.size(); ++i)
    CHECK(no_alpha.data()[i] == doctest::Approx(b.data()[i] / std::pow(3.0, 0.6)));
  auto ident = lrn(b, {1.0, 5, 0.3, 0.0});
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(ident.data()[i] == doctest::Approx(b.data()[i]));
}

TEST_CASE("activations") {
  Tensor x({4}, {-1.0, 2.0, -2.0, 0.0});
  auto r = relu(x);
  CHECK(r.data()[0] == 0.0);
  CHECK(r.data()[1] == 2.0);
  CHECK(leaky_relu(x, 0.2).data()[2] == doctest::Approx(-0.4));
  CHECK(ndgrad::tanh(x).data()[3] == 0.0);
  CHECK(sigmoid(x).data()[3] == 0.5);
  CHECK(sigmoid(Tensor({1}, {-800.0})).item() >= 0.0);
}

TEST_CASE("pooling") {
  CHECK(pool1d(Tensor({1, 3}, {1, 3, 2}), PoolKind::max, 3, 1).item() == 3.0);
  CHECK(pool1d(Tensor({1, 2}, {2, 4}), PoolKind::global_average).item() == 3.0);
  auto avg = pool1d(Tensor({1, 4}, {1, 2, 3, 4}), PoolKind::average, 2, 2);
  CHECK(avg.data()[0] == 1.5);
  CHECK(avg.data()[1] == 3.5);
  CHECK_THROWS_AS(pool1d(Tensor({1, 2}, {1, 2}), PoolKind::max, 3, 1), ShapeError);
}

TEST_CASE("dense") {
  Tensor x({1, 2}, {1, 2});
  CHECK(dense(x, Tensor({1, 2}, {3, 4}), Tensor({1}, {1})).item() == 12.0);
  auto id = dense(x, Tensor({2, 2}, {1, 0, 0, 1}), Tensor::zeros({2}));
  CHECK(id.data()[0] == 1.0);
  CHECK(id.data()[1] == 2.0);
  auto c = dense(Tensor({3, 2}, {1, 2, 3, 4, 5, 6}), Tensor::zeros({2, 2}), Tensor({2}, {7, -1}));
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(c.at({r, 0}) == 7.0);
    CHECK(c.at({r, 1}) == -1.0);
  }
  CHECK_THROWS_AS(dense(x, Tensor::zeros({1, 3}), Tensor::zeros({1})), ShapeError);
}

TEST_CASE("dropout") {
  Rng rng(11);
  Tensor x = Tensor::full({100000}, 1.0);
  auto same = dropout(x, 0.0, Mode::train, rng);
  CHECK(std::equal(same.data().begin(), same.data().end(), x.data().begin()));
  auto ev = dropout(x, 0.2, Mode::eval, rng);
  CHECK(std::equal(ev.data().begin(), ev.data().end(), x.data().begin()));
  auto tr = dropout(x, 0.2, Mode::train, rng);
  std::size_t kept = 0;
  double total = 0.0;
  for (double v : tr.data()) {
    kept += v != 0.0;
    total += v;
  }
  const double frac = static_cast<double>(kept) / 1e5;
  CHECK(frac > 0.79);
  CHECK(frac < 0.81);
  // inverted scaling preserves the mean
  CHECK(total / 1e5 == doctest::Approx(1.0).epsilon(0.02));
  CHECK_THROWS(dropout(x, 1.0, Mode::train, rng));
}

TEST_CASE("softmax cross entropy") {
  int t0[] = {0};
  auto uni = softmax_cross_entropy(Tensor({1, 4}, {0.3, 0.3, 0.3, 0.3}), t0);
  CHECK(uni.loss.item() == doctest::Approx(std::log(4.0)));
  int t1[] = {1};
  auto two = softmax_cross_entropy(Tensor({1, 2}, {1, 2}), t1);
  CHECK(two.loss.item() == doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-14));
  CHECK(two.loss.item() == doctest::Approx(0.3133).epsilon(1e-4));
  auto confident = softmax_cross_entropy(Tensor({1, 2}, {0.0, 60.0}), t1);
  CHECK(confident.loss.item() < 1e-20);
  int bad[] = {2};
  CHECK_THROWS(softmax_cross_entropy(Tensor({1, 2}, {1, 2}), bad));

  Rng rng(5);
  auto logits = random_tensor({16, 7}, rng, -30, 30);
  std::vector<int> tg(16, 3);
  auto ce = softmax_cross_entropy(logits, tg);
  for (std::size_t r = 0; r < 16; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 7; ++c) {
      CHECK(ce.probabilities.at({r, c}) >= 0.0);
      s += ce.probabilities.at({r, c});
    }
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
}

TEST_CASE("sgd update") {
  Tensor p({1}, {1.0}, true);
  std::vector<Tensor> params{p};
  auto state = make_sgd_state(params, 0.1, 0.9, 0.0);
  auto set_grad = [&](double g) {
    p.zero_grad();
    affine(p, g, 0.0).backward();
  };
  set_grad(1.0);
  sgd_update(params, state);
  CHECK(p.item() == doctest::Approx(0.9).epsilon(1e-15));
  set_grad(1.0);
  sgd_update(params, state);
  CHECK(p.item() == doctest::Approx(0.71).epsilon(1e-15));

  Tensor q({2}, {3.0, -2.0}, true);
  std::vector<Tensor> qs{q};
  auto plain = make_sgd_state(qs, 0.5, 0.0, 0.0);
  q.zero_grad();
  mean(q).backward();  // grad 0.5 each
  sgd_update(qs, plain);
  CHECK(q.data()[0] == doctest::Approx(2.75));

  Tensor r({2}, {3.0, -2.0}, true);
  std::vector<Tensor> rs{r};
  auto fixed = make_sgd_state(rs, 0.5, 0.9, 0.0);
  sgd_update(rs, fixed);
  CHECK(r.data()[0] == 3.0);
  CHECK(r.data()[1] == -2.0);
}

TEST_CASE("gradient checks for every op") {
  Rng rng(2024);
  GradCheckOptions opt;
  const double tol = 1e-4;

  SUBCASE("dense") {
    auto x = random_tensor({3, 4}, rng), w = random_tensor({5, 4}, rng), b = random_tensor({5}, rng);
    auto r = grad_check([&] { return probe(dense(x, w, b), 1); }, {x, w, b}, opt);
    CHECK(r.max_relative_error < tol);
  }
  SUBCASE("conv1d") {
    auto x = random_tensor({2, 3, 8}, rng), w = random_tensor({4, 3, 3}, rng), b = random_tensor({4}, rng);
    auto r = grad_check([&] { return probe(conv1d(x, w, 2, 1, b), 2); }, {x, w, b}, opt);
    CHECK(r.max_relative_error < tol);
  }
  SUBCASE("conv_transpose1d") {
    auto x = random_tensor({2, 3, 5}, rng), w = random_tensor({3, 2, 4}, rng), b = random_tensor({2}, rng);
    auto r = grad_check([&] { return probe(conv_transpose1d(x, w, 2, 1, 1, b), 3); }, {x, w, b}, opt);
    CHECK(r.max_relative_error < tol);
  }
  SUBCASE("batch_norm1d train and eval") {
    auto x = random_tensor({4, 3, 5}, rng), g = random_tensor({3}, rng), b = random_tensor({3}, rng);
    auto stats = RunningStats::identity(3);
    for (auto mode : {Mode::train, Mode::eval}) {
      auto r = grad_check([&] { return probe(batch_norm1d(x, g, b, stats, mode), 4); }, {x, g, b}, opt);
      CHECK(r.max_relative_error < tol);
    }
  }
  SUBCASE("lrn") {
    auto x = random_tensor({2, 7, 3}, rng, -3, 3);
    // large alpha so the cross-channel term is visible in the gradient
    auto r = grad_check([&] { return probe(lrn(x, {2.0, 5, 0.3, 0.75}), 5); }, {x}, opt);
    CHECK(r.max_relative_error < tol);
    auto r2 = grad_check([&] { return probe(lrn(x), 6); }, {x}, opt);
    CHECK(r2.max_relative_error < tol);
  }
  SUBCASE("activations") {
    auto x = away_from_zero({3, 5}, rng);
    for (auto kind : {ActivationKind::relu, ActivationKind::leaky_relu, ActivationKind::tanh,
                      ActivationKind::sigmoid}) {
      auto r = grad_check([&] { return probe(activation(x, kind, 0.2), 7); }, {x}, opt);
      CHECK(r.max_relative_error < tol);
    }
  }
  SUBCASE("pooling") {
    auto x = random_tensor({2, 3, 8}, rng);
    for (auto kind : {PoolKind::max, PoolKind::average, PoolKind::global_average}) {
      auto r = grad_check([&] { return probe(pool1d(x, kind, 3, 2), 8); }, {x}, opt);
      CHECK(r.max_relative_error < tol);
    }
  }
  SUBCASE("log losses, reshape, narrow, add, affine") {
    auto p = random_tensor({6}, rng, 0.05, 0.95);
    auto q = random_tensor({6}, rng, 0.05, 0.95);
    auto r = grad_check([&] { return mean(add(neg_log(p), neg_log1m(affine(q, 0.9, 0.01)))); }, {p, q}, opt);
    CHECK(r.max_relative_error < tol);
    auto x = random_tensor({2, 3, 4}, rng);
    auto r2 = grad_check([&] { return probe(narrow_last(reshape(x, {6, 4}), 1, 2), 9); }, {x}, opt);
    CHECK(r2.max_relative_error < tol);
  }
  SUBCASE("softmax cross entropy") {
    auto z = random_tensor({5, 4}, rng, -2, 2);
    std::vector<int> t{0, 3, 1, 1, 2};
    auto r = grad_check([&] { return softmax_cross_entropy(z, t).loss; }, {z}, opt);
    CHECK(r.max_relative_error < tol);
  }
  SUBCASE("dropout with fixed mask") {
    auto x = random_tensor({4, 6}, rng);
    auto r = grad_check([&] {
      Rng fixed(99);
      return probe(dropout(x, 0.3, Mode::train, fixed), 10);
    }, {x}, opt);
    CHECK(r.max_relative_error < tol);
  }
}

TEST_CASE("two seeded training steps are bit-identical") {
  auto run = [] {
    Rng rng(42);
    auto conv = Conv1d::create(1, 4, 3, 1, 1, true, rng);
    auto bn = BatchNorm1d::create(4);
    auto head = Dense::create(4, 3, rng);
    StateList st;
    conv.collect("conv", st);
    bn.collect("bn", st);
    head.collect("head", st);
    Sgd opt(trainable_tensors(st), 0.05, 0.9, 0.005);
    auto x = random_tensor({8, 1, 6}, rng, 0, 1, false);
    std::vector<int> y{0, 1, 2, 0, 1, 2, 0, 1};
    for (int step = 0; step < 2; ++step) {
      opt.zero_grad();
      auto h = pool1d(relu(bn.forward(conv.forward(x), Mode::train)), PoolKind::global_average);
      auto loss = softmax_cross_entropy(head.forward(reshape(h, {8, 4})), y).loss;
      loss.backward();
      opt.step();
    }
    std::vector<double> flat;
    for (auto& s : st) flat.insert(flat.end(), s.tensor.data().begin(), s.tensor.data().end());
    return flat;
  };
  auto a = run();
  auto b = run();
  CHECK(a == b);
}
