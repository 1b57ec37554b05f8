// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cosal/network/network.hpp"
#include "support/fd.hpp"

using namespace cosal;
using namespace cosal::testing;

namespace {

template <typename T>
Tensor<T> random_image(std::mt19937_64& rng, int n, int side) {
  Tensor<T> t(Shape{n, 3, side, side});
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(dist(rng));
  return t;
}

// Cumulative ablation ladder from the bare pipeline to the full model.
AblationToggles ladder(char row) {
  auto t = AblationToggles::none();
  switch (row) {
    case 'f':
      t.use_kc = t.kc_use_att_edge = t.kc_use_att_sal = t.kc_use_att_depth = true;
      [[fallthrough]];
    case 'e':
      t.use_mutual_sa_ca = true;
      [[fallthrough]];
    case 'd':
      t.use_coarse_sal = true;
      [[fallthrough]];
    case 'c':
      t.use_edge = true;
      [[fallthrough]];
    case 'b':
      t.use_ggm = true;
      break;
    case 'a':
      break;
  }
  return t;
}

std::set<std::string> param_names(SaliencyNetwork<float>& net) {
  std::set<std::string> names;
  for (auto& [name, p] : net.named_parameters()) names.insert(name);
  return names;
}

}  // namespace

TEST_CASE("full model emits every documented map at input resolution") {
  std::mt19937_64 rng(601);
  auto cfg = NetworkConfig::tiny(32);
  SaliencyNetwork<float> net(rng, cfg);
  net.train(false);
  NoGradGuard ng;
  auto out = net.forward(Variable<float>(random_image<float>(rng, 2, 32)));

  CHECK(out.s_final.shape() == Shape{2, 1, 32, 32});
  CHECK(out.m_edge.shape() == Shape{2, 1, 32, 32});
  CHECK(out.att_edge.shape() == Shape{2, 1, 32, 32});
  CHECK(out.s_coarse.shape() == Shape{2, 1, 32, 32});
  CHECK(out.att_sal.shape() == Shape{2, 1, 32, 32});
  CHECK(out.att_depth.shape() == Shape{2, 1, 32, 32});
  CHECK(out.m_c.shape() == Shape{2, 64, 1, 1});
  CHECK(out.att_f.shape() == Shape{2, 1, 32, 32});
  CHECK(out.f_low.shape() == Shape{2, 64, 32, 32});
  CHECK(out.f_high.shape() == Shape{2, 64, 32, 32});
  CHECK(out.f_g.shape() == Shape{2, 128, 32, 32});
  CHECK(out.f_fused.shape() == Shape{2, 128, 32, 32});
  REQUIRE(out.s_final.value().all_finite());
  for (std::int64_t i = 0; i < out.s_final.value().numel(); ++i) {
    REQUIRE(out.s_final.value()[i] >= 0.0f);
    REQUIRE(out.s_final.value()[i] <= 1.0f);
  }
}

TEST_CASE("ablation ladder instantiates with the right heads live") {
  std::mt19937_64 img_rng(602);
  auto img = Variable<float>(random_image<float>(img_rng, 1, 32));

  std::vector<std::size_t> counts;
  std::vector<std::set<std::string>> names;
  for (char row : {'a', 'b', 'c', 'd', 'e', 'f'}) {
    std::mt19937_64 rng(603);
    NetworkConfig cfg = NetworkConfig::tiny(32);
    cfg.toggles = ladder(row);
    SaliencyNetwork<float> net(rng, cfg);
    net.train(false);
    NoGradGuard ng;
    auto out = net.forward(img);

    const auto& t = cfg.toggles;
    REQUIRE(out.s_final.defined());
    CHECK(out.m_edge.defined() == t.use_edge);
    CHECK(out.att_edge.defined() == t.use_edge);
    CHECK(out.s_coarse.defined() == t.has_saliency_head());
    CHECK(out.att_sal.defined() == t.has_saliency_head());
    CHECK(out.att_depth.defined() == t.use_mutual_sa_ca);
    CHECK(out.m_c.defined() == t.use_mutual_sa_ca);
    CHECK(out.f_h_tilde.defined() == t.use_mutual_sa_ca);
    CHECK(out.att_f.defined() == (t.use_kc && (t.kc_use_att_edge || t.kc_use_att_sal)));
    CHECK(out.f_fused.defined() == t.use_kc);
    REQUIRE(out.s_final.value().all_finite());

    std::size_t n = 0;
    for (auto& [name, p] : net.named_parameters()) n += static_cast<std::size_t>(p.value().numel());
    counts.push_back(n);
    names.push_back(param_names(net));
  }

  // each rung strictly adds parameters, and adds at least one new module
  for (std::size_t i = 1; i < counts.size(); ++i) {
    REQUIRE(counts[i] > counts[i - 1]);
    std::vector<std::string> added;
    for (const auto& nm : names[i])
      if (!names[i - 1].count(nm)) added.push_back(nm);
    REQUIRE_FALSE(added.empty());
    for (const auto& nm : names[i - 1]) REQUIRE(names[i].count(nm) == 1);
  }
}

TEST_CASE("collector flags can be cut individually") {
  std::mt19937_64 rng(604);
  for (int drop = 0; drop < 3; ++drop) {
    NetworkConfig cfg = NetworkConfig::tiny(32);
    cfg.toggles = ladder('f');
    if (drop == 0) cfg.toggles.kc_use_att_edge = false;
    if (drop == 1) cfg.toggles.kc_use_att_sal = false;
    if (drop == 2) cfg.toggles.kc_use_att_depth = false;
    SaliencyNetwork<float> net(rng, cfg);
    net.train(false);
    NoGradGuard ng;
    std::mt19937_64 img_rng(605);
    auto out = net.forward(Variable<float>(random_image<float>(img_rng, 1, 32)));
    REQUIRE(out.s_final.value().all_finite());
    CHECK(out.f_g_tilde.defined());
  }
}

TEST_CASE("dependent toggles are rejected at construction") {
  std::mt19937_64 rng(606);
  auto expect_reject = [&](AblationToggles t) {
    NetworkConfig cfg = NetworkConfig::tiny(32);
    cfg.toggles = t;
    REQUIRE_THROWS_AS(SaliencyNetwork<float>(rng, cfg), ConfigError);
  };

  auto t1 = AblationToggles::none();
  t1.kc_use_att_edge = true;  // no use_kc
  expect_reject(t1);

  auto t2 = AblationToggles::none();
  t2.use_kc = true;
  t2.kc_use_att_edge = true;  // no edge head
  expect_reject(t2);

  auto t3 = AblationToggles::none();
  t3.use_kc = true;
  t3.kc_use_att_sal = true;  // no saliency head
  expect_reject(t3);

  auto t4 = AblationToggles::none();
  t4.use_kc = true;
  t4.kc_use_att_depth = true;  // no depth stage
  expect_reject(t4);
}

TEST_CASE("same seed builds a bitwise-identical network") {
  auto run = [](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SaliencyNetwork<float> net(rng, NetworkConfig::tiny(32));
    net.train(false);
    NoGradGuard ng;
    std::mt19937_64 img_rng(11);
    return net.forward(Variable<float>(random_image<float>(img_rng, 1, 32)));
  };
  auto a = run(77), b = run(77), c = run(78);
  bool any_diff = false;
  for (std::int64_t i = 0; i < a.s_final.value().numel(); ++i) {
    REQUIRE(a.s_final.value()[i] == b.s_final.value()[i]);
    any_diff |= (a.s_final.value()[i] != c.s_final.value()[i]);
  }
  REQUIRE(any_diff);
}

TEST_CASE("the composite objective reaches every parameter") {
  std::mt19937_64 rng(607);
  SaliencyNetwork<double> net(rng, NetworkConfig::tiny(16));
  std::mt19937_64 img_rng(13);
  auto out = net.forward(Variable<double>(random_image<double>(img_rng, 1, 16)));
  auto loss = add(add(mean_all(out.s_final), mean_all(out.m_edge)),
                  add(mean_all(out.s_coarse), mean_all(out.att_depth)));
  loss.backward();
  std::size_t with_grad = 0, total = 0;
  for (auto& [name, p] : net.named_parameters()) {
    ++total;
    if (p.has_grad()) ++with_grad;
    else INFO("missing grad: " << name);
  }
  REQUIRE(with_grad == total);
}

TEST_CASE("network rejects non-image input shapes") {
  std::mt19937_64 rng(608);
  SaliencyNetwork<float> net(rng, NetworkConfig::tiny(32));
  REQUIRE_THROWS_AS(net.forward(Variable<float>(Tensor<float>::zeros(Shape{1, 1, 32, 32}))),
                    ShapeError);
  REQUIRE_THROWS_AS(net.forward(Variable<float>(Tensor<float>::zeros(Shape{1, 3, 16, 16}))),
                    ShapeError);
}
