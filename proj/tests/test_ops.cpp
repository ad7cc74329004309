#include <doctest.h>

#include <cmath>
#include <random>

#include "csiadv/grad/ops.hpp"

using namespace csiadv::grad;
using csiadv::DimensionError;
using csiadv::StateError;

namespace {

Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

// Direct triple loop.
Tensor<double> dense_oracle(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b) {
  const std::size_t batch = x.dim(0), in = x.dim(1), out = w.dim(0);
  Tensor<double> y(Shape{batch, out});
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < in; ++i) acc += x[n * in + i] * w[o * in + i];
      y[n * out + o] = acc;
    }
  return y;
}

// Nested loops over batch, filter, channel, pixel and tap with zero padding.
Tensor<double> conv_oracle(const Tensor<double>& x, const Tensor<double>& k, const Tensor<double>& b) {
  const std::size_t batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3), f = k.dim(0);
  Tensor<double> y(Shape{batch, f, h, w});
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t o = 0; o < f; ++o)
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t q = 0; q < w; ++q) {
          double acc = b[o];
          for (std::size_t i = 0; i < c; ++i)
            for (int dr = -1; dr <= 1; ++dr)
              for (int dq = -1; dq <= 1; ++dq) {
                const long rr = static_cast<long>(r) + dr, qq = static_cast<long>(q) + dq;
                if (rr < 0 || qq < 0 || rr >= static_cast<long>(h) || qq >= static_cast<long>(w)) continue;
                acc += x[((n * c + i) * h + rr) * w + qq] *
                       k[((o * c + i) * 3 + (dr + 1)) * 3 + (dq + 1)];
              }
          y[((n * f + o) * h + r) * w + q] = acc;
        }
  return y;
}

Tensor<double>* const kSkip = nullptr;

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  REQUIRE(a.shape() == b.shape());
  return (a.vec() - b.vec()).cwiseAbs().maxCoeff();
}

// Loss = <dy, f(x)> so that backward(dy) must equal the gradient of a linear
// functional, which the oracle forward pass can difference directly.
template <typename F>
Tensor<double> numeric_grad(Tensor<double> x, const Tensor<double>& dy, F forward, double h = 1e-6) {
  Tensor<double> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = forward(x).vec().dot(dy.vec());
    x[i] = saved - h;
    const double down = forward(x).vec().dot(dy.vec());
    x[i] = saved;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("dense matches the triple-loop oracle") {
  std::mt19937_64 rng(11);
  auto x = random_tensor(Shape{5, 7}, rng);
  auto w = random_tensor(Shape{3, 7}, rng);
  auto b = random_tensor(Shape{3}, rng);
  CHECK(max_abs_diff(dense_forward(x, w, b), dense_oracle(x, w, b)) < 1e-12);

  SUBCASE("a single vector input yields a vector") {
    auto v = random_tensor(Shape{7}, rng);
    auto y = dense_forward(v, w, b);
    CHECK(y.shape() == Shape{3});
    CHECK(max_abs_diff(y.reshaped(Shape{1, 3}), dense_oracle(v.reshaped(Shape{1, 7}), w, b)) < 1e-12);
  }
  SUBCASE("shape mismatches are rejected") {
    CHECK_THROWS_AS(dense_forward(random_tensor(Shape{5, 6}, rng), w, b), DimensionError);
    CHECK_THROWS_AS(dense_forward(x, w, random_tensor(Shape{4}, rng)), DimensionError);
  }
}

TEST_CASE("dense backward matches differences of the oracle") {
  std::mt19937_64 rng(12);
  auto x = random_tensor(Shape{4, 6}, rng);
  auto w = random_tensor(Shape{3, 6}, rng);
  auto b = random_tensor(Shape{3}, rng);
  auto dy = random_tensor(Shape{4, 3}, rng);
  Tensor<double> dx(x.shape()), dw(w.shape()), db(b.shape());
  dense_backward(x, w, dy, &dx, &dw, &db);
  CHECK(max_abs_diff(dx, numeric_grad(x, dy, [&](const Tensor<double>& v) { return dense_oracle(v, w, b); })) < 1e-7);
  CHECK(max_abs_diff(dw, numeric_grad(w, dy, [&](const Tensor<double>& v) { return dense_oracle(x, v, b); })) < 1e-7);
  CHECK(max_abs_diff(db, numeric_grad(b, dy, [&](const Tensor<double>& v) { return dense_oracle(x, w, v); })) < 1e-7);
}

TEST_CASE("conv2d matches the nested-loop oracle on both kernels") {
  std::mt19937_64 rng(13);
  struct Case { std::size_t filters, channels, h, w; };
  for (const Case c : {Case{2, 2, 5, 4}, Case{8, 2, 4, 4}, Case{2, 16, 4, 5}, Case{3, 1, 1, 1}}) {
    CAPTURE(c.filters);
    CAPTURE(c.channels);
    auto x = random_tensor(Shape{3, c.channels, c.h, c.w}, rng);
    auto k = random_tensor(Shape{c.filters, c.channels, 3, 3}, rng);
    auto b = random_tensor(Shape{c.filters}, rng);
    const auto want = conv_oracle(x, k, b);
    for (auto path : {detail::ConvPath::kIm2col, detail::ConvPath::kTaps}) {
      CHECK(max_abs_diff(conv2d_forward(x, k, b, path), want) < 1e-12);
    }
    CHECK(max_abs_diff(conv2d_forward(x, k, b), want) < 1e-12);
  }
}

TEST_CASE("conv2d backward agrees with the oracle on both kernels") {
  std::mt19937_64 rng(14);
  for (auto [filters, channels] : {std::pair{4, 2}, std::pair{2, 16}}) {
    auto x = random_tensor(Shape{2, std::size_t(channels), 4, 5}, rng);
    auto k = random_tensor(Shape{std::size_t(filters), std::size_t(channels), 3, 3}, rng);
    auto b = random_tensor(Shape{std::size_t(filters)}, rng);
    auto dy = random_tensor(Shape{2, std::size_t(filters), 4, 5}, rng);
    const auto ndx = numeric_grad(x, dy, [&](const Tensor<double>& v) { return conv_oracle(v, k, b); });
    const auto ndk = numeric_grad(k, dy, [&](const Tensor<double>& v) { return conv_oracle(x, v, b); });
    const auto ndb = numeric_grad(b, dy, [&](const Tensor<double>& v) { return conv_oracle(x, k, v); });
    for (auto path : {detail::ConvPath::kIm2col, detail::ConvPath::kTaps}) {
      Tensor<double> dx(x.shape()), dk(k.shape()), db(b.shape());
      conv2d_backward(x, k, dy, &dx, &dk, &db, path);
      CHECK(max_abs_diff(dx, ndx) < 1e-7);
      CHECK(max_abs_diff(dk, ndk) < 1e-7);
      CHECK(max_abs_diff(db, ndb) < 1e-7);
    }
  }
}

TEST_CASE("conv2d backward accumulates and skips null outputs") {
  std::mt19937_64 rng(15);
  auto x = random_tensor(Shape{1, 2, 3, 3}, rng);
  auto k = random_tensor(Shape{2, 2, 3, 3}, rng);
  auto dy = random_tensor(Shape{1, 2, 3, 3}, rng);
  Tensor<double> once(k.shape()), twice(k.shape());
  conv2d_backward(x, k, dy, kSkip, &once, kSkip);
  conv2d_backward(x, k, dy, kSkip, &twice, kSkip);
  conv2d_backward(x, k, dy, kSkip, &twice, kSkip);
  CHECK((twice.vec() - 2.0 * once.vec()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("conv2d rejects malformed operands") {
  std::mt19937_64 rng(16);
  auto x = random_tensor(Shape{1, 2, 4, 4}, rng);
  auto b = random_tensor(Shape{2}, rng);
  CHECK_THROWS_AS(conv2d_forward(x, random_tensor(Shape{2, 3, 3, 3}, rng), b), DimensionError);
  CHECK_THROWS_AS(conv2d_forward(x, random_tensor(Shape{2, 2, 5, 5}, rng), b), DimensionError);
  CHECK_THROWS_AS(conv2d_forward(x, random_tensor(Shape{2, 2, 3, 3}, rng), random_tensor(Shape{3}, rng)),
                  DimensionError);
  CHECK_THROWS_AS(conv2d_forward(random_tensor(Shape{2, 16}, rng), random_tensor(Shape{2, 2, 3, 3}, rng), b),
                  DimensionError);
  Tensor<double> dk(Shape{2, 2, 3, 3});
  CHECK_THROWS_AS(conv2d_backward(x, random_tensor(Shape{2, 2, 3, 3}, rng), random_tensor(Shape{1, 3, 4, 4}, rng),
                                  kSkip, &dk, kSkip),
                  DimensionError);
}

TEST_CASE("the tap kernel is chosen only for channel-reducing layers") {
  CHECK(detail::choose_conv_path(2, 16) == detail::ConvPath::kTaps);
  CHECK(detail::choose_conv_path(2, 2) == detail::ConvPath::kIm2col);
  CHECK(detail::choose_conv_path(16, 8) == detail::ConvPath::kIm2col);
}

TEST_CASE("leaky relu values and piecewise derivative") {
  const double alpha = 0.3;
  Tensor<double> x(Shape{4}, std::vector<double>{5.0, -5.0, 0.0, -0.5});
  auto y = leaky_relu(x, alpha);
  CHECK(y[0] == 5.0);
  CHECK(y[1] == doctest::Approx(-1.5));
  CHECK(y[2] == 0.0);
  Tensor<double> dy(Shape{4}, 1.0), dx(Shape{4});
  leaky_relu_backward(x, alpha, dy, dx);
  CHECK(dx[0] == 1.0);
  CHECK(dx[1] == doctest::Approx(alpha));
  CHECK(dx[3] == doctest::Approx(alpha));
}

TEST_CASE("sigmoid is bounded, centred and has the closed-form slope") {
  Tensor<double> x(Shape{3}, std::vector<double>{0.0, 40.0, -40.0});
  auto y = sigmoid(x);
  CHECK(y[0] == 0.5);
  CHECK(y[1] <= 1.0);
  CHECK(y[2] > 0.0);
  Tensor<double> dy(Shape{3}, 1.0), dx(Shape{3});
  sigmoid_backward(y, dy, dx);
  CHECK(dx[0] == doctest::Approx(0.25));
  Tensor<float> big(Shape{1}, 100.0f);
  CHECK(std::isfinite(sigmoid(big)[0]));
}

TEST_CASE("batch norm train mode standardizes each channel") {
  std::mt19937_64 rng(17);
  auto x = random_tensor(Shape{8, 2, 4, 4}, rng, 3.0, 7.0);
  Tensor<double> gamma(Shape{2}, 1.0), beta(Shape{2}, 0.0);
  BatchNormStats<double> stats(2);
  auto y = batch_norm_forward(x, gamma, beta, stats, BnMode::kTrain);
  for (std::size_t c = 0; c < 2; ++c) {
    double sum = 0, sq = 0;
    for (std::size_t n = 0; n < 8; ++n)
      for (std::size_t i = 0; i < 16; ++i) {
        const double v = y[(n * 2 + c) * 16 + i];
        sum += v;
        sq += v * v;
      }
    CHECK(sum / 128 == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(sq / 128 == doctest::Approx(1.0).epsilon(1e-3));
  }
  CHECK(stats.initialized);
  CHECK(stats.mean[0] == doctest::Approx(0.5).epsilon(0.05));  // 0.1 * ~5
}

TEST_CASE("batch norm infer mode uses only running statistics") {
  Tensor<double> x(Shape{1, 1, 1, 2}, std::vector<double>{2.0, 4.0});
  Tensor<double> gamma(Shape{1}, 2.0), beta(Shape{1}, 1.0);
  auto stats = BatchNormStats<double>::identity(1);
  stats.mean[0] = 1.0;
  stats.var[0] = 4.0 - stats.epsilon;
  auto y = batch_norm_forward(x, gamma, beta, stats, BnMode::kInfer);
  CHECK(y[0] == doctest::Approx(2.0));  // 2 * (2 - 1) / 2 + 1
  CHECK(y[1] == doctest::Approx(4.0));
  CHECK(stats.mean[0] == 1.0);

  BatchNormStats<double> fresh(1);
  CHECK_THROWS_AS(batch_norm_forward(x, gamma, beta, fresh, BnMode::kInfer), StateError);
  auto wrong = BatchNormStats<double>::identity(3);
  CHECK_THROWS_AS(batch_norm_forward(x, gamma, beta, wrong, BnMode::kTrain), DimensionError);
}

TEST_CASE("mse loss and its gradient") {
  Tensor<double> p(Shape{2}, std::vector<double>{1.0, 3.0});
  Tensor<double> t(Shape{2}, std::vector<double>{0.0, 0.0});
  CHECK(mse_loss(p, t) == doctest::Approx(5.0));
  Tensor<double> dp(Shape{2}), dt(Shape{2});
  mse_loss_backward(p, t, 1.0, &dp, &dt);
  CHECK(dp[0] == doctest::Approx(1.0));
  CHECK(dp[1] == doctest::Approx(3.0));
  CHECK(dt[1] == doctest::Approx(-3.0));
  CHECK_THROWS_AS(mse_loss(p, Tensor<double>(Shape{3})), DimensionError);
}

TEST_CASE("dense hand-worked cases") {
  Tensor<double> eye(Shape{2, 2}, std::vector<double>{1, 0, 0, 1});
  Tensor<double> x(Shape{2}, std::vector<double>{3, -1});
  auto y = dense_forward(x, eye, Tensor<double>(Shape{2}));
  CHECK(y[0] == 3.0);
  CHECK(y[1] == -1.0);

  Tensor<double> w(Shape{2, 2}, std::vector<double>{1, 2, 0, 1});
  auto z = dense_forward(Tensor<double>(Shape{2}, 1.0), w, Tensor<double>(Shape{2}, 1.0));
  CHECK(z[0] == 4.0);
  CHECK(z[1] == 2.0);
}

TEST_CASE("float dense and conv agree with the double oracles") {
  std::mt19937_64 rng(21);
  auto w = random_tensor(Shape{8, 16}, rng);
  auto x = random_tensor(Shape{1, 16}, rng);
  auto b = random_tensor(Shape{8}, rng);
  const auto want = dense_oracle(x, w, b);
  const auto got = dense_forward(x.cast<float>(), w.cast<float>(), b.cast<float>());
  for (std::size_t i = 0; i < 8; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-6).scale(1.0));

  auto img = random_tensor(Shape{1, 2, 8, 8}, rng);
  auto k = random_tensor(Shape{4, 2, 3, 3}, rng);
  auto kb = random_tensor(Shape{4}, rng);
  const auto cwant = conv_oracle(img, k, kb);
  const auto cgot = conv2d_forward(img.cast<float>(), k.cast<float>(), kb.cast<float>());
  for (std::size_t i = 0; i < cwant.size(); ++i) CHECK(cgot[i] == doctest::Approx(cwant[i]).epsilon(1e-5).scale(1.0));
}

TEST_CASE("conv2d hand-worked cases") {
  SUBCASE("centre-tap kernel sums the input channels") {
    std::mt19937_64 rng(22);
    auto x = random_tensor(Shape{1, 3, 4, 4}, rng);
    Tensor<double> k(Shape{1, 3, 3, 3});
    for (std::size_t c = 0; c < 3; ++c) k[c * 9 + 4] = 1.0;
    auto y = conv2d_forward(x, k, Tensor<double>(Shape{1}));
    for (std::size_t i = 0; i < 16; ++i) CHECK(y[i] == doctest::Approx(x[i] + x[16 + i] + x[32 + i]));
  }
  SUBCASE("zero padding on a 3x3 block of ones") {
    Tensor<double> x(Shape{1, 1, 3, 3}, 1.0);
    auto y = conv2d_forward(x, Tensor<double>(Shape{1, 1, 3, 3}, 1.0), Tensor<double>(Shape{1}));
    CHECK(y[4] == 9.0);
    for (std::size_t corner : {0, 2, 6, 8}) CHECK(y[corner] == 4.0);
    for (std::size_t edge : {1, 3, 5, 7}) CHECK(y[edge] == 6.0);
  }
}

TEST_CASE("small activation and loss examples") {
  Tensor<double> x(Shape{1}, -2.0);
  CHECK(leaky_relu(x, 0.3)[0] == doctest::Approx(-0.6));
  Tensor<double> ones(Shape{2}, 1.0), zeros(Shape{2});
  CHECK(mse_loss(ones, zeros) == 1.0);
  CHECK(mse_loss(ones, ones) == 0.0);
}

TEST_CASE("batch norm edge cases") {
  SUBCASE("a constant channel maps to beta") {
    Tensor<double> x(Shape{4, 1, 2, 2}, 3.5);
    Tensor<double> gamma(Shape{1}, 2.0), beta(Shape{1}, -0.75);
    BatchNormStats<double> stats(1);
    auto y = batch_norm_forward(x, gamma, beta, stats, BnMode::kTrain);
    for (double v : y.values()) CHECK(v == doctest::Approx(-0.75));
  }
  SUBCASE("standardized input passes through") {
    std::mt19937_64 rng(23);
    auto x = random_tensor(Shape{16, 1, 4, 4}, rng);
    const double mean = x.vec().mean();
    const double sd = std::sqrt((x.vec().array() - mean).square().mean());
    x.vec() = ((x.vec().array() - mean) / sd).matrix();
    BatchNormStats<double> stats(1);
    auto y = batch_norm_forward(x, Tensor<double>(Shape{1}, 1.0), Tensor<double>(Shape{1}), stats, BnMode::kTrain);
    CHECK(max_abs_diff(y, x) < 1e-4);
  }
}
