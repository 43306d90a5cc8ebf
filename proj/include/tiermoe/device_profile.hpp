// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string_view>

namespace tiermoe {

enum class DeviceKind { npu, cpu, aux };
enum class QueueModel { serialized, parallel };

std::string_view to_string(DeviceKind kind);
DeviceKind parse_device_kind(std::string_view text);

inline constexpr std::uint64_t kUnlimitedGraphBytes = std::numeric_limits<std::uint64_t>::max();
// Largest expert graph an M2 Ultra class NPU accepts before falling back.
inline constexpr std::uint64_t kDefaultGraphSizeLimit = 1'200'000'000;

// Cost coefficients of one execution unit, in logical time and energy units.
struct DeviceProfile {
  DeviceKind kind = DeviceKind::cpu;
  double launch_overhead = 0.0;  // per graph dispatch
  double sync_overhead = 0.0;    // per host <-> device handoff; never charged on cpu
  double time_per_mac = 0.0;
  double energy_per_mac = 0.0;
  double energy_per_byte = 0.0;
  double sync_energy = 0.0;  // per handoff
  std::uint64_t graph_size_limit = kUnlimitedGraphBytes;
  QueueModel queue = QueueModel::serialized;
  // Optional small-graph inefficiency: dispatches with fewer rows than the
  // threshold pay time_per_mac * penalty. Disabled by default.
  std::size_t small_rows_threshold = 0;
  double small_rows_penalty = 1.0;

  bool charges_sync() const { return kind != DeviceKind::cpu; }
  double time_per_mac_for(std::size_t rows) const {
    return rows < small_rows_threshold ? time_per_mac * small_rows_penalty : time_per_mac;
  }
  void validate() const;
};

struct DevicePair {
  DeviceProfile npu;
  DeviceProfile cpu;

  const DeviceProfile& get(DeviceKind kind) const { return kind == DeviceKind::cpu ? cpu : npu; }
  void validate() const;
};

}  // namespace tiermoe
