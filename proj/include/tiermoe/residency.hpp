// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tiermoe/calibration.hpp"
#include "tiermoe/capacity.hpp"
#include "tiermoe/device_profile.hpp"
#include "tiermoe/grouped_exec.hpp"

namespace tiermoe {

struct HotColdSplit {
  std::vector<ExpertId> hot;   // popularity rank order
  std::vector<ExpertId> cold;  // popularity rank order
};

// The top ceil(hot_fraction * E) experts by popularity rank are hot.
HotColdSplit classify_hot_cold(const CalibrationProfile& profile, std::size_t layer, double hot_fraction);

// Chunks hot ids, then cold ids, into groups of at most G. Hot and cold
// never share a group; a group runs at its largest member's capacity.
std::vector<ExpertGroup> form_groups(std::span<const ExpertId> hot, std::span<const ExpertId> cold,
                                     std::size_t group_size, const CapacityPlan& plan, std::size_t layer);

// Consecutive chunks of `order` of at most G experts, capacity as in form_groups.
std::vector<ExpertGroup> chunk_groups(std::span<const ExpertId> order, std::size_t group_size,
                                      const CapacityPlan& plan, std::size_t layer);

// Bytes of 32-bit weights in the group's graph: G * 2 * H * F * 4.
std::uint64_t graph_bytes(const ExpertGroup& group, std::size_t hidden_dim, std::size_t ffn_dim);

// launch + sync (non-cpu) + time_per_mac * G*C*2*H*F per invocation. The
// compute term covers the full padded capacity. Under pad-only a member
// whose expected load exceeds C adds invocations.
double estimate_group_cost(const ExpertGroup& group, std::span<const double> expected_loads,
                           const DeviceProfile& device, std::size_t hidden_dim, std::size_t ffn_dim,
                           OverflowPolicy policy = OverflowPolicy::prune);

struct GroupPlacement {
  ExpertGroup group;
  DeviceKind device = DeviceKind::npu;
  double npu_cost = 0.0;
  double cpu_cost = 0.0;
  bool forced_cpu = false;  // graph exceeds the npu size limit
};

struct LayerPlacement {
  std::vector<GroupPlacement> groups;

  std::vector<ExpertGroup> expert_groups() const;
  // Groups resident on the npu.
  std::vector<ExpertGroup> resident_set() const;
};

struct PlacementPlan {
  std::vector<LayerPlacement> layers;
};

// Graphs over the npu size limit go to cpu; every other group goes to the
// cheaper device under estimate_group_cost, ties to npu.
// expected_loads is indexed by expert id.
LayerPlacement place_groups(std::span<const ExpertGroup> groups, std::span<const double> expected_loads,
                            const DevicePair& devices, std::size_t hidden_dim, std::size_t ffn_dim,
                            OverflowPolicy policy = OverflowPolicy::prune);

// Every group on one device, except graphs too large for the npu, which fall
// back to cpu. Throws RunFailure for such a graph when fallback is disabled.
LayerPlacement place_all_on(DeviceKind device, std::span<const ExpertGroup> groups, const DevicePair& devices,
                            std::size_t hidden_dim, std::size_t ffn_dim, bool allow_cpu_fallback);

}  // namespace tiermoe
