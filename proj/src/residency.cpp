// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "tiermoe/residency.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tiermoe/error.hpp"

namespace tiermoe {

HotColdSplit classify_hot_cold(const CalibrationProfile& profile, std::size_t layer, double hot_fraction) {
  if (!(hot_fraction > 0.0 && hot_fraction <= 1.0)) {
    throw ConfigError("classify_hot_cold: hot_fraction must be in (0, 1]");
  }
  const auto rank = profile.rank(layer);
  const auto hot_count = std::min(
      rank.size(), static_cast<std::size_t>(std::ceil(hot_fraction * static_cast<double>(rank.size()) - 1e-9)));
  HotColdSplit split;
  split.hot.assign(rank.begin(), rank.begin() + static_cast<std::ptrdiff_t>(hot_count));
  split.cold.assign(rank.begin() + static_cast<std::ptrdiff_t>(hot_count), rank.end());
  return split;
}

std::vector<ExpertGroup> chunk_groups(std::span<const ExpertId> order, std::size_t group_size,
                                      const CapacityPlan& plan, std::size_t layer) {
  if (group_size == 0) throw ConfigError("group size must be >= 1");
  std::vector<ExpertGroup> groups;
  for (std::size_t begin = 0; begin < order.size(); begin += group_size) {
    ExpertGroup group;
    const std::size_t end = std::min(order.size(), begin + group_size);
    for (std::size_t i = begin; i < end; ++i) {
      group.expert_ids.push_back(order[i]);
      group.capacity = std::max(group.capacity, plan.at(layer, order[i]));
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

std::vector<ExpertGroup> form_groups(std::span<const ExpertId> hot, std::span<const ExpertId> cold,
                                     std::size_t group_size, const CapacityPlan& plan, std::size_t layer) {
  auto groups = chunk_groups(hot, group_size, plan, layer);
  auto cold_groups = chunk_groups(cold, group_size, plan, layer);
  groups.insert(groups.end(), std::make_move_iterator(cold_groups.begin()),
                std::make_move_iterator(cold_groups.end()));
  return groups;
}

std::uint64_t graph_bytes(const ExpertGroup& group, std::size_t hidden_dim, std::size_t ffn_dim) {
  return static_cast<std::uint64_t>(group.size()) * 2 * hidden_dim * ffn_dim * sizeof(float);
}

double estimate_group_cost(const ExpertGroup& group, std::span<const double> expected_loads,
                           const DeviceProfile& device, std::size_t hidden_dim, std::size_t ffn_dim,
                           OverflowPolicy policy) {
  if (expected_loads.size() != group.size()) {
    throw ConfigError("estimate_group_cost: " + std::to_string(expected_loads.size()) + " loads for a group of " +
                      std::to_string(group.size()));
  }
  double invocations = 1.0;
  if (policy == OverflowPolicy::pad_only && group.capacity > 0) {
    for (double load : expected_loads) invocations = std::max(invocations, std::ceil(load / group.capacity - 1e-9));
  }
  const double macs = static_cast<double>(group.rows()) * 2.0 * static_cast<double>(hidden_dim * ffn_dim);
  const double per_call = device.launch_overhead + (device.charges_sync() ? device.sync_overhead : 0.0) +
                          device.time_per_mac_for(group.rows()) * macs;
  return invocations * per_call;
}

std::vector<ExpertGroup> LayerPlacement::expert_groups() const {
  std::vector<ExpertGroup> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(g.group);
  return out;
}

std::vector<ExpertGroup> LayerPlacement::resident_set() const {
  std::vector<ExpertGroup> out;
  for (const auto& g : groups) {
    if (g.device != DeviceKind::cpu) out.push_back(g.group);
  }
  return out;
}

LayerPlacement place_groups(std::span<const ExpertGroup> groups, std::span<const double> expected_loads,
                            const DevicePair& devices, std::size_t hidden_dim, std::size_t ffn_dim,
                            OverflowPolicy policy) {
  LayerPlacement placement;
  for (const auto& group : groups) {
    std::vector<double> loads;
    loads.reserve(group.size());
    for (ExpertId e : group.expert_ids) {
      if (e >= expected_loads.size()) throw ConfigError("place_groups: no expected load for expert " + std::to_string(e));
      loads.push_back(expected_loads[e]);
    }
    GroupPlacement p;
    p.group = group;
    p.npu_cost = estimate_group_cost(group, loads, devices.npu, hidden_dim, ffn_dim, policy);
    p.cpu_cost = estimate_group_cost(group, loads, devices.cpu, hidden_dim, ffn_dim, policy);
    if (graph_bytes(group, hidden_dim, ffn_dim) > devices.npu.graph_size_limit) {
      p.device = DeviceKind::cpu;
      p.forced_cpu = true;
    } else {
      p.device = p.npu_cost <= p.cpu_cost ? devices.npu.kind : DeviceKind::cpu;
    }
    placement.groups.push_back(std::move(p));
  }
  return placement;
}

LayerPlacement place_all_on(DeviceKind device, std::span<const ExpertGroup> groups, const DevicePair& devices,
                            std::size_t hidden_dim, std::size_t ffn_dim, bool allow_cpu_fallback) {
  LayerPlacement placement;
  for (const auto& group : groups) {
    GroupPlacement p;
    p.group = group;
    p.device = device;
    if (device != DeviceKind::cpu && graph_bytes(group, hidden_dim, ffn_dim) > devices.npu.graph_size_limit) {
      if (!allow_cpu_fallback) {
        throw RunFailure("group of " + std::to_string(group.size()) + " experts needs " +
                         std::to_string(graph_bytes(group, hidden_dim, ffn_dim)) +
                         " graph bytes, over the npu limit, and cpu fallback is disabled");
      }
      p.device = DeviceKind::cpu;
      p.forced_cpu = true;
    }
    placement.groups.push_back(std::move(p));
  }
  return placement;
}

}  // namespace tiermoe
