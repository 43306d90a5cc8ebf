// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tiermoe/capacity.hpp"
#include "tiermoe/device_profile.hpp"
#include "tiermoe/residency.hpp"

namespace tiermoe {

enum class Stage : std::size_t { attention_stub = 0, router, pack, expert_ffn, scatter };
inline constexpr std::size_t kNumStages = 5;
std::string_view to_string(Stage stage);

inline constexpr std::uint64_t kDefaultOrchestrationCost = 1000;

struct DispatchEvent {
  DeviceKind device = DeviceKind::cpu;
  Stage stage = Stage::router;
  std::optional<std::size_t> group;
  double start = 0.0;
  double end = 0.0;
  std::uint64_t macs = 0;
  std::uint64_t bytes_moved = 0;
  bool sync = false;  // one host <-> device handoff

  double duration() const { return end - start; }
};

struct RunMetrics {
  double ttft = 0.0;
  double energy_compute = 0.0;
  double energy_comm = 0.0;
  double ept = 0.0;
  std::uint64_t cpu_cycles = 0;
  std::array<double, kNumStages> stage_time{};
  double cpu_busy = 0.0;
  double accel_busy = 0.0;
  std::size_t launches = 0;        // expert graph invocations
  std::size_t accel_launches = 0;  // of which on the accelerator
  std::size_t syncs = 0;
  std::size_t padded_rows = 0;
  std::size_t dropped_tokens = 0;
  std::size_t routed_slots = 0;
  std::size_t tokens = 0;

  // Sums additive fields; ept is recomputed from the folded energies.
  RunMetrics& operator+=(const RunMetrics& other);
};

// Host-visible work of one expert group in one layer.
struct GroupWork {
  DeviceKind device = DeviceKind::npu;
  std::size_t group_size = 1;
  std::size_t rounds = 1;          // static invocations; 0 means the group is idle
  std::size_t rows_per_round = 0;  // G*C for static graphs, n for dynamic execution
  std::size_t valid_rows = 0;      // routed tokens actually computed
};

struct LayerWork {
  std::vector<GroupWork> groups;
  std::size_t tokens = 0;
  std::size_t padded_rows = 0;
  std::size_t dropped_tokens = 0;
  std::size_t routed_slots = 0;
};

struct SimParams {
  std::size_t num_experts = 16;
  std::size_t hidden_dim = 64;
  std::size_t ffn_dim = 128;
  double attention_cost = 0.0;  // fixed time per layer invocation
  DeviceKind attention_device = DeviceKind::npu;
  std::uint64_t orchestration_cost = kDefaultOrchestrationCost;
};

struct LayerSimulation {
  std::vector<DispatchEvent> events;
  RunMetrics metrics;
  double end_time = 0.0;
};

// Builds the work of a placed layer from per-expert routed counts. Static
// groups execute their full padded capacity.
LayerWork layer_work_from(const LayerPlacement& placement, std::span<const std::size_t> loads,
                          OverflowPolicy policy, std::size_t tokens);

// Logical-time schedule of one layer starting at start_time:
//   attention -> router (cpu) -> pack per group (cpu) -> expert graphs, with
//   accelerator dispatches serialized on its queue and cpu groups on the
//   host -> barrier -> scatter per group (cpu).
LayerSimulation simulate_layer(const LayerWork& work, const DevicePair& devices, const SimParams& params,
                               double start_time = 0.0);

// Host work: cpu events count macs plus an orchestration constant; other
// devices' events count only the orchestration constant.
std::uint64_t cpu_cycles_proxy(std::span<const DispatchEvent> events,
                               std::uint64_t orchestration_cost = kDefaultOrchestrationCost);

struct EnergyBreakdown {
  double compute = 0.0;
  double comm = 0.0;
  double ept = 0.0;
};

// E_compute = sum macs * energy_per_mac; E_comm = sum bytes * energy_per_byte
// plus a fixed energy per sync; EPT = (E_compute + E_comm) / tokens.
EnergyBreakdown energy_accounting(std::span<const DispatchEvent> events, const DevicePair& devices,
                                  std::size_t tokens);

// Anchor points the device pair is solved against.
struct AnchorPoints {
  double cpu_time_per_mac = 1e-3;
  double npu_speedup = 2.0;     // cpu time_per_mac / npu time_per_mac
  double sync_fraction = 0.6;   // share of the reference workload spent in sync
  std::size_t reference_dispatches = 16;
  std::size_t reference_rows = 64;  // rows per reference dispatch
  std::size_t hidden_dim = 64;
  std::size_t ffn_dim = 128;
  double npu_launch_overhead = 200.0;
  double cpu_launch_overhead = 20.0;
  double cpu_energy_per_mac = 1.0;
  double npu_energy_per_mac = 0.3;
  double cpu_energy_per_byte = 0.05;
  double npu_energy_per_byte = 0.05;
  double sync_energy = 200.0;
  std::uint64_t graph_size_limit = kDefaultGraphSizeLimit;
};

// npu time_per_mac = cpu / speedup; sync_overhead chosen so that the
// reference workload of `reference_dispatches` single-expert graphs spends
// exactly sync_fraction of its npu time in sync.
DevicePair calibrate_device_profiles(const AnchorPoints& anchors);

}  // namespace tiermoe
