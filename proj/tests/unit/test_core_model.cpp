// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tiermoe/core_model.hpp"
#include "tiermoe/error.hpp"
#include "tiermoe/kernels.hpp"

namespace tiermoe {
namespace {

ExpertWeights make_expert(std::size_t H, std::size_t F, std::mt19937_64& rng) {
  return random_experts({1, 1, H, F}, rng).front();
}

TEST(Tensor, ShapeAndZeros) {
  Tensor2D t(3, 2);
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_EQ(t.size(), 6u);
  for (float v : t.data()) EXPECT_EQ(v, 0.0f);
  EXPECT_THROW(Tensor2D(2, 0), ConfigError);
  EXPECT_THROW(Tensor2D(2, 2, std::vector<float>(3)), ConfigError);
  EXPECT_TRUE(Tensor2D(0, 4).empty());
}

TEST(Tensor, ConcatAndSlice) {
  Tensor2D a(2, 2, {1, 2, 3, 4});
  Tensor2D b(1, 2, {5, 6});
  const auto c = concat_rows(a, b);
  EXPECT_EQ(c.rows(), 3u);
  EXPECT_EQ(c.slice_rows(2, 3), b);
  EXPECT_EQ(c.slice_rows(0, 2), a);
}

TEST(Kernels, SerialMatchesNaiveLoop) {
  std::mt19937_64 rng(3);
  const auto a = random_tensor(17, 9, rng, 1.0f);
  const auto b = random_tensor(9, 13, rng, 1.0f);
  EXPECT_LE(oracle::rel_error(kernels::matmul_serial(a, b), oracle::matmul(oracle::to_matrix(a), oracle::to_matrix(b))),
            1e-6);
}

TEST(Kernels, ParallelIsBitIdenticalToSerial) {
  std::mt19937_64 rng(4);
  const auto a = random_tensor(64, 32, rng, 1.0f);
  const auto b = random_tensor(32, 48, rng, 1.0f);
  EXPECT_EQ(kernels::matmul_serial(a, b), kernels::matmul_parallel(a, b));
}

TEST(RouteTopk, SingleTokenKOne) {
  Tensor2D hidden(1, 1, {1.0f});
  Tensor2D router(1, 2, {2.0f, 1.0f});
  const auto r = route_topk(hidden, router, 1);
  ASSERT_EQ(r.token(0).size(), 1u);
  EXPECT_EQ(r.token(0)[0].expert, 0u);
  EXPECT_FLOAT_EQ(r.token(0)[0].weight, 1.0f);
}

TEST(RouteTopk, KEqualsEIsFullSoftmax) {
  Tensor2D hidden(1, 1, {1.0f});
  Tensor2D router(1, 3, {0.5f, 1.5f, -1.0f});
  const auto r = route_topk(hidden, router, 3);
  const double z = std::exp(0.5) + std::exp(1.5) + std::exp(-1.0);
  const double expected[3] = {std::exp(0.5) / z, std::exp(1.5) / z, std::exp(-1.0) / z};
  for (const auto& c : r.token(0)) EXPECT_NEAR(c.weight, expected[c.expert], 1e-6);
}

TEST(RouteTopk, ConservesRoutedSlots) {
  std::mt19937_64 rng(5);
  const auto hidden = random_tensor(256, 16, rng, 1.0f);
  const auto router = random_tensor(16, 8, rng, 1.0f);
  const auto r = route_topk(hidden, router, 2);
  std::size_t total = 0;
  for (ExpertId e = 0; e < 8; ++e) {
    total += r.load(e);
    for (std::size_t i = 1; i < r.expert_tokens(e).size(); ++i) {
      EXPECT_LT(r.expert_tokens(e)[i - 1].token, r.expert_tokens(e)[i].token);
    }
  }
  EXPECT_EQ(total, 512u);
}

TEST(RouteTopk, TiesGoToLowerId) {
  Tensor2D hidden(1, 1, {1.0f});
  Tensor2D router(1, 4, {1.0f, 3.0f, 3.0f, 3.0f});
  const auto r = route_topk(hidden, router, 2);
  EXPECT_EQ(r.token(0)[0].expert, 1u);
  EXPECT_EQ(r.token(0)[1].expert, 2u);
}

TEST(RouteTopk, ShapeMismatchIsConfigError) {
  EXPECT_THROW(route_topk(Tensor2D(2, 3), Tensor2D(4, 2), 1), ConfigError);
  EXPECT_THROW(route_topk(Tensor2D(2, 3), Tensor2D(3, 2), 3), ConfigError);
}

TEST(RoutingTable, RejectsBrokenInvariants) {
  EXPECT_THROW(RoutingTable(4, {{{0, 0.5f}, {0, 0.5f}}}), ConfigError);  // duplicate
  EXPECT_THROW(RoutingTable(4, {{{0, 0.7f}, {1, 0.7f}}}), ConfigError);  // sum
  EXPECT_THROW(RoutingTable(4, {{{0, 1.5f}, {1, -0.5f}}}), ConfigError);  // sign
  EXPECT_THROW(RoutingTable(4, {{{9, 1.0f}}}), ConfigError);              // range
  EXPECT_THROW(RoutingTable(4, {{{0, 1.0f}}, {{0, 0.5f}, {1, 0.5f}}}), ConfigError);  // ragged k
}

TEST(Ffn, ZeroInputMapsToZero) {
  std::mt19937_64 rng(6);
  const auto w = make_expert(8, 16, rng);
  const auto y = ffn_forward(Tensor2D(5, 8), w);
  for (float v : y.data()) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(ffn_forward(Tensor2D(0, 8), w).rows(), 0u);
}

TEST(Ffn, HandComputedTwoByTwo) {
  ExpertWeights w{Tensor2D(2, 2, {1, 0, 0, 1}), Tensor2D(2, 2, {1, 0, 0, 2})};
  const auto y = ffn_forward(Tensor2D(1, 2, {1.0f, -2.0f}), w);
  // silu(1) = 1/(1+e^-1), silu(-2) = -2/(1+e^2)
  EXPECT_NEAR(y(0, 0), 1.0 / (1.0 + std::exp(-1.0)), 1e-6);
  EXPECT_NEAR(y(0, 1), 2.0 * (-2.0 / (1.0 + std::exp(2.0))), 1e-6);
}

TEST(Ffn, MatchesNaiveLoop) {
  std::mt19937_64 rng(7);
  const auto w = make_expert(32, 64, rng);
  const auto x = random_tensor(64, 32, rng, 1.0f);
  oracle::Matrix expected;
  const auto xm = oracle::to_matrix(x);
  for (const auto& row : xm) expected.push_back(oracle::ffn_row(row, w));
  EXPECT_LE(oracle::rel_error(ffn_forward(x, w), expected), 1e-5);
  EXPECT_LE(oracle::rel_error(ffn_forward(x, w, kernels::Exec::serial), expected), 1e-5);
}

TEST(Ffn, RowWiseConcatenation) {
  std::mt19937_64 rng(8);
  const auto w = make_expert(16, 32, rng);
  const auto a = random_tensor(7, 16, rng, 1.0f);
  const auto b = random_tensor(5, 16, rng, 1.0f);
  const auto joint = ffn_forward(concat_rows(a, b), w);
  const auto split = concat_rows(ffn_forward(a, w), ffn_forward(b, w));
  EXPECT_LE(max_relative_error(joint, split), 1e-6);
}

TEST(Ffn, ShapeMismatchIsConfigError) {
  std::mt19937_64 rng(9);
  EXPECT_THROW(ffn_forward(Tensor2D(2, 5), make_expert(4, 8, rng)), ConfigError);
}

TEST(ReferenceMoe, SingleExpertKOne) {
  std::mt19937_64 rng(10);
  const auto experts = random_experts({1, 1, 8, 16}, rng);
  const auto x = random_tensor(6, 8, rng, 1.0f);
  std::vector<std::vector<GateChoice>> per_token(6, {{0, 1.0f}});
  const auto out = reference_moe_forward(x, RoutingTable(1, per_token), experts);
  EXPECT_EQ(out, ffn_forward(x, experts[0], kernels::Exec::serial));
}

TEST(ReferenceMoe, HalfWeightsOnTwinExperts) {
  std::mt19937_64 rng(11);
  auto experts = random_experts({2, 2, 8, 16}, rng);
  experts[1] = experts[0];
  const auto x = random_tensor(4, 8, rng, 1.0f);
  std::vector<std::vector<GateChoice>> per_token(4, {{0, 0.5f}, {1, 0.5f}});
  const auto out = reference_moe_forward(x, RoutingTable(2, per_token), experts);
  EXPECT_EQ(out, ffn_forward(x, experts[0], kernels::Exec::serial));
}

TEST(ReferenceMoe, MatchesPerTokenLoop) {
  std::mt19937_64 rng(12);
  const auto experts = random_experts({4, 2, 16, 32}, rng);
  const auto x = random_tensor(32, 16, rng, 1.0f);
  const auto routing = oracle::random_routing(32, 4, 2, rng);
  EXPECT_LE(oracle::rel_error(reference_moe_forward(x, routing, experts), oracle::moe_per_token(x, routing, experts)),
            1e-5);
}

TEST(ReferenceMoe, CombineIsLinearInGateWeights) {
  std::mt19937_64 rng(13);
  const auto experts = random_experts({4, 2, 8, 16}, rng);
  const auto x = random_tensor(3, 8, rng, 1.0f);
  std::vector<std::vector<GateChoice>> base{{{0, 0.25f}, {2, 0.5f}}, {{1, 0.5f}, {3, 0.25f}}, {{0, 0.5f}, {1, 0.25f}}};
  auto scaled = base;
  for (auto& choices : scaled) {
    for (auto& c : choices) c.weight *= 3.0f;
  }
  using WC = RoutingTable::WeightCheck;
  const auto a = reference_moe_forward(x, RoutingTable(4, base, WC::positive), experts);
  const auto b = reference_moe_forward(x, RoutingTable(4, scaled, WC::positive), experts);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b.data()[i], 3.0f * a.data()[i], 1e-5);
}

TEST(ReferenceMoe, OutOfRangeExpertIsConfigError) {
  std::mt19937_64 rng(14);
  const auto experts = random_experts({2, 1, 4, 4}, rng);
  std::vector<std::vector<GateChoice>> per_token(1, {{3, 1.0f}});
  EXPECT_THROW(reference_moe_forward(Tensor2D(1, 4), RoutingTable(4, per_token), experts), ConfigError);
}

TEST(Saliency, KnownRows) {
  Tensor2D t(2, 2, {0, 0, 3, 4});
  const auto s = l2_saliency(t);
  EXPECT_EQ(s[0], 0.0);
  EXPECT_DOUBLE_EQ(s[1], 5.0);
}

TEST(Saliency, MatchesSummationOracle) {
  std::mt19937_64 rng(15);
  const auto t = random_tensor(20, 33, rng, 2.0f);
  const auto s = l2_saliency(t);
  for (std::size_t i = 0; i < t.rows(); ++i) EXPECT_NEAR(s[i], oracle::l2(t.row(i)), 1e-6);
}

}  // namespace
}  // namespace tiermoe
