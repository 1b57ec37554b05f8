// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <random>
#include <vector>

#include "cosal/network/guidance.hpp"
#include "support/fd.hpp"
#include "support/freeze.hpp"

using namespace cosal;
using namespace cosal::testing;

namespace {

template <typename T>
Tensor<T> random_map(std::mt19937_64& rng, Shape shape) {
  Tensor<T> t(shape);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(dist(rng));
  return t;
}

/// Zero the conv and pin the normalizer so a branch emits a constant.
template <typename T>
void freeze_constant(ConvBnPRelu<T>& block, T value) {
  block.conv().weight().value().fill(T(0));
  block.bn().running_mean().fill(T(0));
  block.bn().running_var().fill(T(1));
  block.bn().gamma().value().fill(T(1));
  block.bn().beta().value().fill(value);
  block.act().slope().value().fill(T(1));
}

}  // namespace

TEST_CASE("context block keeps channel count and resolution") {
  std::mt19937_64 rng(201);
  DilatedContextBlock<float> block(rng, 8);
  block.train(false);
  NoGradGuard ng;
  auto x = Variable<float>(random_map<float>(rng, Shape{2, 8, 16, 16}));
  auto y = block.forward(x);
  CHECK(y.shape() == Shape{2, 8, 16, 16});
  CHECK(y.value().all_finite());
}

TEST_CASE("widest branch samples 18 pixels away") {
  std::mt19937_64 rng(202);
  DilatedContextBlock<float> block(rng, 3);
  block.train(false);
  NoGradGuard ng;
  // Rewire the widest branch into a pure +18 column shift: only kernel tap
  // (ky=1, kx=2) is set, so out(h, w) = x(h, w + 18) with zero padding.
  freeze_identity(block.d18());
  auto& w = block.d18().conv().weight().value();
  w.fill(0.0f);
  for (std::int64_t o = 0; o < 3; ++o) w.at(o, o, 1, 2) = 1.0f;

  auto x = Variable<float>(random_map<float>(rng, Shape{1, 3, 4, 24}));
  auto y = block.d18().forward(x);
  REQUIRE(y.shape() == Shape{1, 3, 4, 24});
  for (int c = 0; c < 3; ++c)
    for (int h = 0; h < 4; ++h)
      for (int wi = 0; wi < 24; ++wi) {
        const float expect = (wi + 18 < 24) ? x.value().at(0, c, h, wi + 18) : 0.0f;
        REQUIRE(y.value().at(0, c, h, wi) == Catch::Approx(expect).margin(1e-6));
      }
}

TEST_CASE("branch concat order is d1, d6, d12, d18, p1") {
  std::mt19937_64 rng(203);
  const int C = 4;
  DilatedContextBlock<float> block(rng, C);
  block.train(false);
  NoGradGuard ng;
  freeze_constant(block.d1(), 1.0f);
  freeze_constant(block.d6(), 2.0f);
  freeze_constant(block.d12(), 3.0f);
  freeze_constant(block.d18(), 4.0f);
  freeze_constant(block.p1(), 5.0f);
  freeze_identity(block.fuse());
  auto x = Variable<float>(random_map<float>(rng, Shape{1, C, 6, 6}));
  for (int slice = 0; slice < 5; ++slice) {
    freeze_slice_select(block.fuse().conv(), slice);
    auto y = block.forward(x);
    for (std::int64_t i = 0; i < y.value().numel(); ++i)
      REQUIRE(y.value()[i] == Catch::Approx(float(slice + 1)).margin(1e-5));
  }
}

TEST_CASE("guidance emits a 4x-upsampled high-level feature and refines top-down") {
  std::mt19937_64 rng(204);
  GlobalGuidance<float> g(rng, /*use_context=*/true, 8);
  g.train(false);
  NoGradGuard ng;
  std::vector<int> log;
  g.set_call_log(&log);
  auto t3 = Variable<float>(random_map<float>(rng, Shape{1, 8, 8, 8}));
  auto t4 = Variable<float>(random_map<float>(rng, Shape{1, 8, 8, 8}));
  auto t5 = Variable<float>(random_map<float>(rng, Shape{1, 8, 8, 8}));
  auto out = g.forward(t3, t4, t5);
  CHECK(out.f3_tilde.shape() == Shape{1, 8, 8, 8});
  CHECK(out.f4_tilde.shape() == Shape{1, 8, 8, 8});
  CHECK(out.f5_tilde.shape() == Shape{1, 8, 8, 8});
  CHECK(out.f_high.shape() == Shape{1, 8, 32, 32});
  REQUIRE(log == std::vector<int>{5, 4, 3});
}

TEST_CASE("identity-frozen guidance expands to up4(t3 + 2*t4 + 4*t5)") {
  std::mt19937_64 rng(205);
  const int C = 4;
  GlobalGuidance<double> g(rng, /*use_context=*/true, C);
  g.train(false);
  NoGradGuard ng;
  for (int level : {3, 4, 5}) {
    auto& blk = g.context(level);
    freeze_identity(blk.d1());
    freeze_identity(blk.fuse());
    freeze_slice_select(blk.fuse().conv(), 0);
  }
  freeze_slice_sum(g.projection());
  g.projection().bias().value().fill(0.0);

  auto t3 = Variable<double>(random_map<double>(rng, Shape{1, C, 4, 4}));
  auto t4 = Variable<double>(random_map<double>(rng, Shape{1, C, 4, 4}));
  auto t5 = Variable<double>(random_map<double>(rng, Shape{1, C, 4, 4}));
  auto out = g.forward(t3, t4, t5);

  auto expect = upsample_bilinear(add(add(t3, scale(t4, 2.0)), scale(t5, 4.0)), 4);
  REQUIRE(out.f_high.shape() == expect.shape());
  for (std::int64_t i = 0; i < expect.value().numel(); ++i)
    REQUIRE(out.f_high.value()[i] == Catch::Approx(expect.value()[i]).margin(1e-12));

  // and the refined maps themselves follow the recursion
  for (std::int64_t i = 0; i < t5.value().numel(); ++i) {
    REQUIRE(out.f5_tilde.value()[i] == Catch::Approx(t5.value()[i]).margin(1e-12));
    REQUIRE(out.f4_tilde.value()[i] ==
            Catch::Approx(t4.value()[i] + t5.value()[i]).margin(1e-12));
    REQUIRE(out.f3_tilde.value()[i] ==
            Catch::Approx(t3.value()[i] + t4.value()[i] + 2.0 * t5.value()[i]).margin(1e-12));
  }
}

TEST_CASE("disabling context passes transition features through untouched") {
  std::mt19937_64 rng(206);
  GlobalGuidance<float> g(rng, /*use_context=*/false, 8);
  g.train(false);
  NoGradGuard ng;
  auto t3 = Variable<float>(random_map<float>(rng, Shape{1, 8, 4, 4}));
  auto t4 = Variable<float>(random_map<float>(rng, Shape{1, 8, 4, 4}));
  auto t5 = Variable<float>(random_map<float>(rng, Shape{1, 8, 4, 4}));
  std::vector<int> log;
  g.set_call_log(&log);
  auto out = g.forward(t3, t4, t5);
  CHECK(log.empty());
  for (std::int64_t i = 0; i < t3.value().numel(); ++i) {
    REQUIRE(out.f3_tilde.value()[i] == t3.value()[i]);
    REQUIRE(out.f4_tilde.value()[i] == t4.value()[i]);
    REQUIRE(out.f5_tilde.value()[i] == t5.value()[i]);
  }
  CHECK(out.f_high.shape() == Shape{1, 8, 16, 16});
  // the aggregation projection stays even without context blocks
  bool has_project = false;
  for (auto& [name, p] : g.named_parameters())
    if (name.rfind("project.", 0) == 0) has_project = true;
  CHECK(has_project);
  REQUIRE_THROWS_AS(g.context(3), ConfigError);
}

TEST_CASE("guidance rejects mismatched transition shapes") {
  std::mt19937_64 rng(207);
  GlobalGuidance<float> g(rng, true, 4);
  auto a = Variable<float>(Tensor<float>::zeros(Shape{1, 4, 4, 4}));
  auto b = Variable<float>(Tensor<float>::zeros(Shape{1, 4, 8, 8}));
  REQUIRE_THROWS_AS(g.forward(a, b, a), ShapeError);
}

TEST_CASE("guidance gradients match finite differences") {
  std::mt19937_64 rng(208);
  GlobalGuidance<double> g(rng, true, 2);
  std::mt19937_64 data_rng(31);
  Variable<double> t3(random_signed(data_rng, Shape{1, 2, 4, 4}), true);
  Variable<double> t4(random_signed(data_rng, Shape{1, 2, 4, 4}), true);
  Variable<double> t5(random_signed(data_rng, Shape{1, 2, 4, 4}), true);
  auto forward = [&] { return mean_all(g.forward(t3, t4, t5).f_high); };
  const double err = fd_check({t3, t4, t5}, forward);
  CHECK(err < 1e-4);
}
