// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "cosal/core/ops.hpp"
#include "support/fd.hpp"

using namespace cosal;
using cosal::testing::fd_check;
using cosal::testing::random_signed;
using cosal::testing::random_uniform;

namespace {
constexpr double kFdTol = 1e-6;
}

TEST_CASE("elementwise ops: values and gradients") {
  std::mt19937_64 rng(11);
  Variable<double> a(random_signed(rng, Shape{2, 3, 4, 4}), true);
  Variable<double> b(random_signed(rng, Shape{2, 3, 4, 4}), true);

  SECTION("add") {
    auto y = add(a, b);
    REQUIRE(y.value()[5] == Catch::Approx(a.value()[5] + b.value()[5]));
    CHECK(fd_check({a, b}, [&] { return sum_all(add(a, b)); }) < kFdTol);
  }
  SECTION("mul") {
    auto y = mul(a, b);
    REQUIRE(y.value()[7] == Catch::Approx(a.value()[7] * b.value()[7]));
    CHECK(fd_check({a, b}, [&] { return mean_all(mul(a, b)); }) < kFdTol);
  }
  SECTION("scale") {
    auto y = scale(a, -2.5);
    REQUIRE(y.value()[3] == Catch::Approx(-2.5 * a.value()[3]));
    CHECK(fd_check({a}, [&] { return sum_all(scale(a, -2.5)); }) < kFdTol);
  }
  SECTION("shape mismatch throws") {
    Variable<double> c(Tensor<double>::zeros(Shape{2, 3, 4, 5}), false);
    REQUIRE_THROWS_AS(add(a, c), ShapeError);
    REQUIRE_THROWS_AS(mul(a, c), ShapeError);
  }
}

TEST_CASE("spatial attention broadcast") {
  std::mt19937_64 rng(12);
  Variable<double> x(random_signed(rng, Shape{2, 3, 3, 3}), true);
  Variable<double> att(random_uniform(rng, Shape{2, 1, 3, 3}, 0.1, 0.9), true);

  auto y = mul_spatial_map(x, att);
  REQUIRE(y.shape() == x.shape());
  // channel broadcast: every channel scaled by the same map entry
  for (int c = 0; c < 3; ++c)
    REQUIRE(y.value().at(1, c, 2, 2) ==
            Catch::Approx(x.value().at(1, c, 2, 2) * att.value().at(1, 0, 2, 2)));
  CHECK(fd_check({x, att}, [&] { return sum_all(mul_spatial_map(x, att)); }) < kFdTol);

  SECTION("residual form is exact identity for zero attention") {
    Variable<double> z(Tensor<double>::zeros(Shape{2, 1, 3, 3}), false);
    auto r = spatial_attention_residual(x, z);
    for (std::int64_t i = 0; i < r.value().numel(); ++i)
      REQUIRE(r.value()[i] == x.value()[i]);  // bitwise
  }
  SECTION("residual gradient") {
    CHECK(fd_check({x, att}, [&] { return mean_all(spatial_attention_residual(x, att)); }) <
          kFdTol);
  }
}

TEST_CASE("channel gate broadcast") {
  std::mt19937_64 rng(13);
  Variable<double> x(random_signed(rng, Shape{2, 4, 3, 3}), true);
  Variable<double> g(random_uniform(rng, Shape{2, 4, 1, 1}, 0.1, 0.9), true);
  auto y = mul_channel_gate(x, g);
  REQUIRE(y.value().at(1, 2, 1, 1) ==
          Catch::Approx(x.value().at(1, 2, 1, 1) * g.value().at(1, 2, 0, 0)));
  CHECK(fd_check({x, g}, [&] { return sum_all(mul_channel_gate(x, g)); }) < kFdTol);
  CHECK(fd_check({x, g}, [&] { return mean_all(channel_attention_residual(x, g)); }) < kFdTol);
}

TEST_CASE("concat and channel selection") {
  std::mt19937_64 rng(14);
  Variable<double> a(random_signed(rng, Shape{2, 2, 3, 3}), true);
  Variable<double> b(random_signed(rng, Shape{2, 3, 3, 3}), true);
  auto y = concat_channels<double>({a, b});
  REQUIRE(y.shape() == Shape{2, 5, 3, 3});
  REQUIRE(y.value().at(1, 1, 2, 0) == a.value().at(1, 1, 2, 0));
  REQUIRE(y.value().at(1, 4, 0, 2) == b.value().at(1, 2, 0, 2));
  CHECK(fd_check({a, b}, [&] {
          return sum_all(select_channel(concat_channels<double>({a, b}), 3));
        }) < kFdTol);

  auto s = select_channel(y, 2);
  REQUIRE(s.shape() == Shape{2, 1, 3, 3});
  REQUIRE(s.value().at(0, 0, 1, 1) == b.value().at(0, 0, 1, 1));
  REQUIRE_THROWS_AS(select_channel(y, 5), ShapeError);
}

TEST_CASE("softmax over channels") {
  SECTION("zero logits give a uniform distribution") {
    Variable<double> x(Tensor<double>::zeros(Shape{1, 2, 2, 2}), false);
    auto y = softmax_channels(x);
    for (std::int64_t i = 0; i < y.value().numel(); ++i)
      REQUIRE(y.value()[i] == Catch::Approx(0.5));
  }
  SECTION("columns sum to one and match the direct formula") {
    std::mt19937_64 rng(15);
    Variable<double> x(random_signed(rng, Shape{2, 3, 2, 2}), true);
    auto y = softmax_channels(x);
    for (int n = 0; n < 2; ++n)
      for (int h = 0; h < 2; ++h)
        for (int w = 0; w < 2; ++w) {
          double total = 0, denom = 0;
          for (int c = 0; c < 3; ++c) denom += std::exp(x.value().at(n, c, h, w));
          for (int c = 0; c < 3; ++c) {
            total += y.value().at(n, c, h, w);
            REQUIRE(y.value().at(n, c, h, w) ==
                    Catch::Approx(std::exp(x.value().at(n, c, h, w)) / denom));
          }
          REQUIRE(total == Catch::Approx(1.0));
        }
  }
  SECTION("stable under large logits") {
    Variable<double> x(Tensor<double>::from(Shape{1, 2, 1, 1}, {1000.0, 999.0}), false);
    auto y = softmax_channels(x);
    REQUIRE(y.value().all_finite());
    REQUIRE(y.value()[0] == Catch::Approx(1.0 / (1.0 + std::exp(-1.0))));
  }
  SECTION("gradient") {
    std::mt19937_64 rng(16);
    Variable<double> x(random_signed(rng, Shape{2, 2, 3, 3}), true);
    Variable<double> w(random_signed(rng, Shape{2, 2, 3, 3}), false);
    CHECK(fd_check({x}, [&] { return sum_all(mul(softmax_channels(x), w)); }) < kFdTol);
  }
}

TEST_CASE("relu and prelu") {
  std::mt19937_64 rng(17);
  Variable<double> x(random_signed(rng, Shape{2, 3, 4, 4}), true);
  Variable<double> slope(Tensor<double>::scalar(0.25), true);

  auto r = relu(x);
  auto p = prelu(x, slope);
  for (std::int64_t i = 0; i < x.value().numel(); ++i) {
    const double v = x.value()[i];
    REQUIRE(r.value()[i] == (v > 0 ? v : 0.0));
    REQUIRE(p.value()[i] == Catch::Approx(v > 0 ? v : 0.25 * v));
  }
  CHECK(fd_check({x}, [&] { return sum_all(relu(x)); }) < kFdTol);
  CHECK(fd_check({x, slope}, [&] { return sum_all(prelu(x, slope)); }) < kFdTol);
  REQUIRE_THROWS_AS(prelu(x, x), ConfigError);
}

TEST_CASE("max pooling") {
  SECTION("3x3 stride 2 pad 1 matches a hand-computed window") {
    Tensor<double> t(Shape{1, 1, 4, 4});
    for (int i = 0; i < 16; ++i) t[i] = i;
    Variable<double> x(t, false);
    auto y = max_pool2d(x, 3, 2, 1);
    REQUIRE(y.shape() == Shape{1, 1, 2, 2});
    CHECK(y.value().at(0, 0, 0, 0) == 5.0);
    CHECK(y.value().at(0, 0, 0, 1) == 7.0);
    CHECK(y.value().at(0, 0, 1, 0) == 13.0);
    CHECK(y.value().at(0, 0, 1, 1) == 15.0);
  }
  SECTION("gradient routes to the argmax only") {
    std::mt19937_64 rng(18);
    Variable<double> x(random_signed(rng, Shape{2, 2, 6, 6}), true);
    CHECK(fd_check({x}, [&] { return sum_all(max_pool2d(x, 3, 2, 1)); }) < kFdTol);
  }
}

TEST_CASE("global average pooling") {
  std::mt19937_64 rng(19);
  Variable<double> x(random_signed(rng, Shape{2, 3, 4, 4}), true);
  auto y = global_avg_pool(x);
  REQUIRE(y.shape() == Shape{2, 3, 1, 1});
  double acc = 0;
  for (int h = 0; h < 4; ++h)
    for (int w = 0; w < 4; ++w) acc += x.value().at(1, 2, h, w);
  REQUIRE(y.value().at(1, 2, 0, 0) == Catch::Approx(acc / 16.0));
  CHECK(fd_check({x}, [&] {
          Variable<double> w(Tensor<double>::from(Shape{2, 3, 1, 1}, {1, 2, 3, 4, 5, 6}), false);
          return sum_all(mul(global_avg_pool(x), w));
        }) < kFdTol);
}

TEST_CASE("bilinear upsampling") {
  SECTION("1d profile with half-pixel sampling") {
    Variable<double> x(Tensor<double>::from(Shape{1, 1, 1, 2}, {1.0, 3.0}), false);
    auto y = upsample_bilinear(x, 2);
    REQUIRE(y.shape() == Shape{1, 1, 2, 4});
    CHECK(y.value().at(0, 0, 0, 0) == Catch::Approx(1.0));
    CHECK(y.value().at(0, 0, 0, 1) == Catch::Approx(1.5));
    CHECK(y.value().at(0, 0, 0, 2) == Catch::Approx(2.5));
    CHECK(y.value().at(0, 0, 0, 3) == Catch::Approx(3.0));
  }
  SECTION("constant input stays constant") {
    Variable<double> x(Tensor<double>::full(Shape{1, 2, 3, 3}, 0.7), false);
    auto y = upsample_bilinear(x, 4);
    REQUIRE(y.shape() == Shape{1, 2, 12, 12});
    for (std::int64_t i = 0; i < y.value().numel(); ++i)
      REQUIRE(y.value()[i] == Catch::Approx(0.7));
  }
  SECTION("factor 1 is the identity") {
    std::mt19937_64 rng(20);
    Variable<double> x(random_signed(rng, Shape{1, 1, 3, 3}), false);
    auto y = upsample_bilinear(x, 1);
    REQUIRE(y.node() == x.node());
  }
  SECTION("gradient") {
    std::mt19937_64 rng(21);
    Variable<double> x(random_signed(rng, Shape{1, 2, 3, 3}), true);
    Variable<double> w(random_signed(rng, Shape{1, 2, 6, 6}), false);
    CHECK(fd_check({x}, [&] { return sum_all(mul(upsample_bilinear(x, 2), w)); }) < kFdTol);
  }
}

TEST_CASE("reductions") {
  Variable<double> x(Tensor<double>::from(Shape{2, 2}, {1.0, 2.0, 3.0, 4.0}), true);
  REQUIRE(sum_all(x).value()[0] == Catch::Approx(10.0));
  REQUIRE(mean_all(x).value()[0] == Catch::Approx(2.5));
  CHECK(fd_check({x}, [&] { return mean_all(x); }) < kFdTol);
}

TEST_CASE("batch normalization") {
  std::mt19937_64 rng(22);
  const int C = 3;
  Variable<double> x(random_signed(rng, Shape{2, C, 3, 3}), true);
  Variable<double> gamma(random_uniform(rng, Shape{C}, 0.5, 1.5), true);
  Variable<double> beta(random_signed(rng, Shape{C}, 0.05, 0.3), true);

  SECTION("training mode normalizes with batch statistics") {
    Tensor<double> rm = Tensor<double>::zeros(Shape{C});
    Tensor<double> rv = Tensor<double>::full(Shape{C}, 1.0);
    auto y = batch_norm(x, gamma, beta, rm, rv, true);
    // per-channel output mean ~ beta, std ~ gamma
    for (int c = 0; c < C; ++c) {
      double mean = 0;
      for (int n = 0; n < 2; ++n)
        for (int h = 0; h < 3; ++h)
          for (int w = 0; w < 3; ++w) mean += y.value().at(n, c, h, w);
      mean /= 18.0;
      REQUIRE(mean == Catch::Approx(beta.value()[c]).margin(1e-9));
    }
    // running buffers pulled toward batch statistics with momentum 0.1
    double mu0 = 0;
    for (int n = 0; n < 2; ++n)
      for (int h = 0; h < 3; ++h)
        for (int w = 0; w < 3; ++w) mu0 += x.value().at(n, 0, h, w);
    mu0 /= 18.0;
    double var0 = 0;
    for (int n = 0; n < 2; ++n)
      for (int h = 0; h < 3; ++h)
        for (int w = 0; w < 3; ++w) {
          const double d = x.value().at(n, 0, h, w) - mu0;
          var0 += d * d;
        }
    var0 /= 18.0;
    REQUIRE(rm[0] == Catch::Approx(0.1 * mu0));
    REQUIRE(rv[0] == Catch::Approx(0.9 + 0.1 * var0 * 18.0 / 17.0));
  }

  SECTION("eval mode applies the running affine transform") {
    Tensor<double> rm = Tensor<double>::from(Shape{C}, {0.1, -0.2, 0.3});
    Tensor<double> rv = Tensor<double>::from(Shape{C}, {1.5, 0.5, 2.0});
    Tensor<double> rm0 = rm, rv0 = rv;
    auto y = batch_norm(x, gamma, beta, rm, rv, false);
    const double expected = (x.value().at(1, 1, 2, 2) - (-0.2)) / std::sqrt(0.5 + 1e-5) *
                                gamma.value()[1] +
                            beta.value()[1];
    REQUIRE(y.value().at(1, 1, 2, 2) == Catch::Approx(expected));
    // buffers untouched in eval mode
    for (int c = 0; c < C; ++c) {
      REQUIRE(rm[c] == rm0[c]);
      REQUIRE(rv[c] == rv0[c]);
    }
  }

  SECTION("training-mode gradient") {
    Tensor<double> rm = Tensor<double>::zeros(Shape{C});
    Tensor<double> rv = Tensor<double>::full(Shape{C}, 1.0);
    Variable<double> w(random_signed(rng, Shape{2, C, 3, 3}), false);
    CHECK(fd_check({x, gamma, beta}, [&] {
            return sum_all(mul(batch_norm(x, gamma, beta, rm, rv, true), w));
          }) < 1e-5);
  }

  SECTION("eval-mode gradient") {
    Tensor<double> rm = Tensor<double>::from(Shape{C}, {0.1, -0.2, 0.3});
    Tensor<double> rv = Tensor<double>::from(Shape{C}, {1.5, 0.5, 2.0});
    CHECK(fd_check({x, gamma, beta}, [&] {
            return mean_all(batch_norm(x, gamma, beta, rm, rv, false));
          }) < kFdTol);
  }
}
