// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "tiermoe/device_profile.hpp"

#include <cmath>
#include <string>

#include "tiermoe/error.hpp"

namespace tiermoe {

std::string_view to_string(DeviceKind kind) {
  switch (kind) {
    case DeviceKind::npu: return "npu";
    case DeviceKind::cpu: return "cpu";
    case DeviceKind::aux: return "aux";
  }
  return "?";
}

DeviceKind parse_device_kind(std::string_view text) {
  if (text == "npu") return DeviceKind::npu;
  if (text == "cpu") return DeviceKind::cpu;
  if (text == "aux") return DeviceKind::aux;
  throw ConfigError("unknown device '" + std::string(text) + "'");
}

void DeviceProfile::validate() const {
  const std::string name(to_string(kind));
  for (double v : {launch_overhead, sync_overhead, time_per_mac, energy_per_mac, energy_per_byte, sync_energy}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(name + " profile: coefficients must be finite and >= 0");
  }
  if (!(small_rows_penalty >= 1.0)) throw ConfigError(name + " profile: small_rows_penalty must be >= 1");
  if (kind == DeviceKind::npu && queue != QueueModel::serialized) {
    throw ConfigError("npu profile: the npu queue is serialized");
  }
}

void DevicePair::validate() const {
  if (npu.kind == DeviceKind::cpu) throw ConfigError("device pair: the accelerator slot holds a cpu profile");
  if (cpu.kind != DeviceKind::cpu) throw ConfigError("device pair: the host slot must be a cpu profile");
  npu.validate();
  cpu.validate();
}

}  // namespace tiermoe
