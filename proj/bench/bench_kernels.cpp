// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Serial reference kernels against their OpenMP counterparts, and grouped
// static execution against the dynamic per-expert oracle.

#include <benchmark/benchmark.h>

#include <random>

#include "tiermoe/capacity.hpp"
#include "tiermoe/core_model.hpp"
#include "tiermoe/grouped_exec.hpp"

namespace {

using namespace tiermoe;

void BM_MatmulSerial(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tensor(n, 64, rng, 1.0f);
  const auto b = random_tensor(64, 128, rng, 1.0f);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul_serial(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * 64 * 128));
}
BENCHMARK(BM_MatmulSerial)->Arg(64)->Arg(256)->Arg(1024);

void BM_MatmulParallel(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tensor(n, 64, rng, 1.0f);
  const auto b = random_tensor(64, 128, rng, 1.0f);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul_parallel(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * 64 * 128));
}
BENCHMARK(BM_MatmulParallel)->Arg(64)->Arg(256)->Arg(1024);

void BM_Ffn(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto w = random_experts({1, 1, 64, 128}, rng).front();
  const auto x = random_tensor(256, 64, rng, 1.0f);
  const auto exec = state.range(0) == 0 ? kernels::Exec::serial : kernels::Exec::parallel;
  for (auto _ : state) benchmark::DoNotOptimize(ffn_forward(x, w, exec));
}
BENCHMARK(BM_Ffn)->Arg(0)->Arg(1)->ArgNames({"parallel"});

struct LayerFixture {
  Tensor2D hidden;
  RoutingTable routing;
  std::vector<ExpertWeights> experts;
  std::vector<double> saliency;
  CapacityPlan plan;
  std::vector<ExpertGroup> groups;

  explicit LayerFixture(std::size_t group_size) {
    std::mt19937_64 rng(3);
    hidden = random_tensor(256, 64, rng, 1.0f);
    routing = route_topk(hidden, random_tensor(64, 16, rng, 1.0f), 2);
    experts = random_experts({16, 2, 64, 128}, rng);
    saliency = l2_saliency(hidden);
    std::size_t max_load = 0;
    for (auto n : routing.loads()) max_load = std::max(max_load, n);
    const auto cap = align_capacity(static_cast<double>(max_load));
    plan = uniform_plan(1, 16, cap, 256, OverflowPolicy::prune);
    for (std::size_t s = 0; s < 16; s += group_size) {
      ExpertGroup g{{}, cap};
      for (std::size_t e = s; e < s + group_size; ++e) g.expert_ids.push_back(static_cast<ExpertId>(e));
      groups.push_back(g);
    }
  }
};

void BM_ReferenceMoe(benchmark::State& state) {
  const LayerFixture f(1);
  for (auto _ : state) benchmark::DoNotOptimize(reference_moe_forward(f.hidden, f.routing, f.experts));
}
BENCHMARK(BM_ReferenceMoe);

void BM_GroupedMoe(benchmark::State& state) {
  const LayerFixture f(static_cast<std::size_t>(state.range(0)));
  const auto exec = state.range(1) == 0 ? kernels::Exec::serial : kernels::Exec::parallel;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        grouped_moe_forward(f.hidden, f.routing, f.plan, 0, f.groups, f.experts, f.saliency, exec));
  }
}
BENCHMARK(BM_GroupedMoe)->ArgsProduct({{1, 4, 16}, {0, 1}})->ArgNames({"G", "parallel"});

}  // namespace

BENCHMARK_MAIN();
