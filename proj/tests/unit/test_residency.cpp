// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include <random>

#include "tiermoe/device_sim.hpp"
#include "tiermoe/error.hpp"
#include "tiermoe/residency.hpp"
#include "tiermoe/workload.hpp"

namespace tiermoe {
namespace {

CalibrationProfile profile_from(std::vector<std::uint64_t> counts) {
  CalibrationProfile p;
  p.num_experts = counts.size();
  p.num_layers = 1;
  p.top_k = 1;
  for (auto c : counts) p.total_tokens += c;
  p.counts = {std::move(counts)};
  return p;
}

DevicePair simple_devices() {
  DevicePair d;
  d.cpu.kind = DeviceKind::cpu;
  d.cpu.launch_overhead = 10;
  d.cpu.time_per_mac = 1.0;
  d.npu.kind = DeviceKind::npu;
  d.npu.launch_overhead = 100;
  d.npu.sync_overhead = 50;
  d.npu.time_per_mac = 0.5;
  d.npu.graph_size_limit = kDefaultGraphSizeLimit;
  return d;
}

TEST(HotCold, FullFractionIsAllHot) {
  const auto s = classify_hot_cold(profile_from({5, 1, 3, 2}), 0, 1.0);
  EXPECT_EQ(s.hot.size(), 4u);
  EXPECT_TRUE(s.cold.empty());
}

TEST(HotCold, QuarterOfSixteenByRank) {
  std::vector<std::uint64_t> counts(16);
  for (std::size_t e = 0; e < 16; ++e) counts[e] = (e * 7) % 16 + 1;
  const auto p = profile_from(counts);
  const auto s = classify_hot_cold(p, 0, 0.25);
  const auto rank = p.rank(0);
  EXPECT_EQ(s.hot, std::vector<ExpertId>(rank.begin(), rank.begin() + 4));
  EXPECT_EQ(s.cold.size(), 12u);
}

TEST(HotCold, UniformCountsPickLowestIds) {
  const auto s = classify_hot_cold(profile_from(std::vector<std::uint64_t>(16, 3)), 0, 0.25);
  EXPECT_EQ(s.hot, (std::vector<ExpertId>{0, 1, 2, 3}));
}

TEST(HotCold, FractionOutOfRangeRejected) {
  EXPECT_THROW(classify_hot_cold(profile_from({1, 2}), 0, 0.0), ConfigError);
  EXPECT_THROW(classify_hot_cold(profile_from({1, 2}), 0, 1.5), ConfigError);
}

TEST(FormGroups, ChunkingAndSeparation) {
  const auto plan = uniform_plan(1, 16, 32, 256, OverflowPolicy::prune);
  std::vector<ExpertId> hot{0, 1, 2, 3};
  std::vector<ExpertId> cold;
  for (ExpertId e = 4; e < 16; ++e) cold.push_back(e);
  const auto groups = form_groups(hot, cold, 4, plan, 0);
  ASSERT_EQ(groups.size(), 4u);
  EXPECT_EQ(groups[0].expert_ids, hot);

  const auto wide = form_groups(hot, cold, 32, plan, 0);
  ASSERT_EQ(wide.size(), 2u);
  EXPECT_EQ(wide[0].size(), 4u);
  EXPECT_EQ(wide[1].size(), 12u);

  const std::vector<ExpertId> one{0};
  EXPECT_EQ(form_groups(one, {}, 4, uniform_plan(1, 1, 16, 16, OverflowPolicy::prune), 0).size(), 1u);
}

TEST(FormGroups, CapacityIsLargestMember) {
  const TierSet tiers({64, 32, 16});
  const auto plan = assign_tiers(profile_from({60, 20, 0, 0}), tiers, 80);
  // Expected loads 60, 20, 0, 0.
  const std::vector<ExpertId> ids{0, 1, 2, 3};
  const auto groups = chunk_groups(ids, 2, plan, 0);
  EXPECT_EQ(groups[0].capacity, 64u);
  EXPECT_EQ(groups[1].capacity, 16u);
}

TEST(GraphBytes, Examples) {
  EXPECT_EQ(graph_bytes({{0}, 16}, 2, 2), 32u);
  EXPECT_EQ(graph_bytes({{0, 1, 2, 3, 4, 5, 6, 7}, 16}, 64, 128), 524288u);
  EXPECT_EQ(graph_bytes({{0, 1}, 16}, 64, 128), 2 * graph_bytes({{0}, 16}, 64, 128));
}

TEST(GroupCost, SingleComputeTerm) {
  DeviceProfile d;
  d.kind = DeviceKind::npu;
  d.time_per_mac = 1.0;
  EXPECT_DOUBLE_EQ(estimate_group_cost({{0}, 16}, std::vector<double>{3.0}, d, 4, 8), 16.0 * 2 * 4 * 8);
}

TEST(GroupCost, CpuHasNoSyncTerm) {
  DeviceProfile d;
  d.kind = DeviceKind::cpu;
  d.launch_overhead = 5;
  d.sync_overhead = 1000;
  EXPECT_DOUBLE_EQ(estimate_group_cost({{0}, 16}, std::vector<double>{1.0}, d, 4, 4), 5.0);
}

TEST(GroupCost, MergingHalvesLaunchOverhead) {
  const auto devices = simple_devices();
  const ExpertGroup a{{0, 1}, 16};
  const ExpertGroup b{{2, 3}, 16};
  const ExpertGroup ab{{0, 1, 2, 3}, 16};
  const std::vector<double> two{1, 1};
  const std::vector<double> four{1, 1, 1, 1};
  const auto& npu = devices.npu;
  const double split = estimate_group_cost(a, two, npu, 4, 4) + estimate_group_cost(b, two, npu, 4, 4);
  const double merged = estimate_group_cost(ab, four, npu, 4, 4);
  EXPECT_DOUBLE_EQ(split - merged, npu.launch_overhead + npu.sync_overhead);
}

TEST(Place, OversizedGraphGoesToCpu) {
  auto devices = simple_devices();
  devices.npu.launch_overhead = 0;
  devices.npu.sync_overhead = 0;
  const std::vector<ExpertGroup> groups{{{0}, 16}};
  const std::vector<double> loads{10};
  const std::size_t H = 8192;
  const std::size_t F = 18432;  // 2*H*F*4 bytes > 1.2e9
  ASSERT_GT(graph_bytes(groups[0], H, F), kDefaultGraphSizeLimit);
  const auto p = place_groups(groups, loads, devices, H, F);
  EXPECT_EQ(p.groups[0].device, DeviceKind::cpu);
  EXPECT_TRUE(p.groups[0].forced_cpu);
}

TEST(Place, FreeNpuDominates) {
  auto devices = simple_devices();
  devices.npu.launch_overhead = 0;
  devices.npu.sync_overhead = 0;
  std::vector<ExpertGroup> groups{{{0, 1}, 16}, {{2}, 64}};
  const auto p = place_groups(groups, std::vector<double>{5, 5, 5}, devices, 8, 8);
  for (const auto& g : p.groups) EXPECT_EQ(g.device, DeviceKind::npu);
  EXPECT_EQ(p.resident_set().size(), 2u);
}

TEST(Place, TinyColdGroupStaysOnCpu) {
  const auto devices = simple_devices();
  // cpu: 10 + 16*2*2*2 = 138; npu: 150 + 64 = 214.
  const std::vector<ExpertGroup> groups{{{0}, 16}};
  const auto p = place_groups(groups, std::vector<double>{1}, devices, 2, 2);
  EXPECT_DOUBLE_EQ(p.groups[0].cpu_cost, 138.0);
  EXPECT_DOUBLE_EQ(p.groups[0].npu_cost, 214.0);
  EXPECT_EQ(p.groups[0].device, DeviceKind::cpu);
}

TEST(Place, TieGoesToNpu) {
  DevicePair d = simple_devices();
  d.npu.launch_overhead = 10;
  d.npu.sync_overhead = 0;
  d.npu.time_per_mac = 1.0;
  const std::vector<ExpertGroup> groups{{{0}, 16}};
  EXPECT_EQ(place_groups(groups, std::vector<double>{1}, d, 2, 2).groups[0].device, DeviceKind::npu);
}

TEST(Place, ChosenDeviceIsNeverCostlier) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    DevicePair d = simple_devices();
    d.npu.launch_overhead = static_cast<double>(rng() % 2000);
    d.npu.sync_overhead = static_cast<double>(rng() % 2000);
    std::vector<ExpertGroup> groups;
    std::vector<double> loads(8);
    for (ExpertId e = 0; e < 8; ++e) {
      groups.push_back({{e}, static_cast<std::uint32_t>(16 * (1 + rng() % 4))});
      loads[e] = static_cast<double>(rng() % 64);
    }
    const auto p = place_groups(groups, loads, d, 4, 4);
    for (const auto& g : p.groups) {
      const double chosen = g.device == DeviceKind::cpu ? g.cpu_cost : g.npu_cost;
      EXPECT_LE(chosen, std::min(g.cpu_cost, g.npu_cost));
    }
  }
}

TEST(Place, RaisingLaunchNeverMovesToNpu) {
  const std::vector<ExpertGroup> groups{{{0}, 16}, {{1, 2}, 32}, {{3, 4, 5, 6}, 64}};
  const std::vector<double> loads(7, 10.0);
  DevicePair d = simple_devices();
  auto prev = place_groups(groups, loads, d, 4, 4);
  for (double launch = 0; launch < 20000; launch += 250) {
    d.npu.launch_overhead = launch;
    const auto next = place_groups(groups, loads, d, 4, 4);
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (prev.groups[i].device == DeviceKind::cpu) EXPECT_EQ(next.groups[i].device, DeviceKind::cpu);
    }
    prev = next;
  }
}

TEST(PlaceAllOn, FallbackOrFailure) {
  DevicePair d = simple_devices();
  d.npu.graph_size_limit = 100;
  const std::vector<ExpertGroup> groups{{{0}, 16}, {{1, 2, 3, 4}, 16}};
  // bytes: 1*2*2*2*4 = 32 and 128.
  const auto p = place_all_on(DeviceKind::npu, groups, d, 2, 2, true);
  EXPECT_EQ(p.groups[0].device, DeviceKind::npu);
  EXPECT_EQ(p.groups[1].device, DeviceKind::cpu);
  EXPECT_THROW(place_all_on(DeviceKind::npu, groups, d, 2, 2, false), RunFailure);
}

}  // namespace
}  // namespace tiermoe
