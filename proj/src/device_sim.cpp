// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "tiermoe/device_sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tiermoe/error.hpp"

namespace tiermoe {

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::attention_stub: return "attention_stub";
    case Stage::router: return "router";
    case Stage::pack: return "pack";
    case Stage::expert_ffn: return "expert_ffn";
    case Stage::scatter: return "scatter";
  }
  return "?";
}

RunMetrics& RunMetrics::operator+=(const RunMetrics& other) {
  ttft += other.ttft;
  energy_compute += other.energy_compute;
  energy_comm += other.energy_comm;
  cpu_cycles += other.cpu_cycles;
  for (std::size_t s = 0; s < kNumStages; ++s) stage_time[s] += other.stage_time[s];
  cpu_busy += other.cpu_busy;
  accel_busy += other.accel_busy;
  launches += other.launches;
  accel_launches += other.accel_launches;
  syncs += other.syncs;
  padded_rows += other.padded_rows;
  dropped_tokens += other.dropped_tokens;
  routed_slots += other.routed_slots;
  tokens += other.tokens;
  ept = tokens > 0 ? (energy_compute + energy_comm) / static_cast<double>(tokens) : 0.0;
  return *this;
}

LayerWork layer_work_from(const LayerPlacement& placement, std::span<const std::size_t> loads,
                          OverflowPolicy policy, std::size_t tokens) {
  LayerWork work;
  work.tokens = tokens;
  for (const auto& placed : placement.groups) {
    const auto& group = placed.group;
    GroupWork g;
    g.device = placed.device;
    g.group_size = group.size();
    g.rows_per_round = group.rows();
    std::size_t max_load = 0;
    for (ExpertId e : group.expert_ids) {
      if (e >= loads.size()) throw ConfigError("layer_work_from: no load for expert " + std::to_string(e));
      const std::size_t n = loads[e];
      max_load = std::max(max_load, n);
      work.routed_slots += n;
      if (policy == OverflowPolicy::prune) {
        g.valid_rows += std::min<std::size_t>(n, group.capacity);
        work.dropped_tokens += overflow(n, group.capacity);
      } else {
        g.valid_rows += n;
      }
    }
    g.rounds = policy == OverflowPolicy::prune
                   ? 1
                   : std::max<std::size_t>(1, (max_load + group.capacity - 1) / group.capacity);
    work.padded_rows += g.rounds * g.rows_per_round - g.valid_rows;
    work.groups.push_back(g);
  }
  return work;
}

namespace {

class Timeline {
 public:
  Timeline(const DevicePair& devices, const SimParams& params, double start)
      : devices_(devices), params_(params), cpu_free_(start), accel_free_(start) {}

  double& free_at(DeviceKind kind) { return kind == DeviceKind::cpu ? cpu_free_ : accel_free_; }

  const DispatchEvent& emit(DeviceKind device, Stage stage, std::optional<std::size_t> group, double ready,
                            double duration, std::uint64_t macs, std::uint64_t bytes, bool sync) {
    const bool concurrent = devices_.get(device).queue == QueueModel::parallel;
    double& free = free_at(device);
    DispatchEvent ev{device, stage, group, concurrent ? ready : std::max(free, ready), 0.0, macs, bytes, sync};
    ev.end = ev.start + duration;
    free = std::max(free, ev.end);
    events_.push_back(ev);
    return events_.back();
  }

  std::vector<DispatchEvent> take() { return std::move(events_); }

 private:
  const DevicePair& devices_;
  const SimParams& params_;
  double cpu_free_;
  double accel_free_;
  std::vector<DispatchEvent> events_;
};

}  // namespace

LayerSimulation simulate_layer(const LayerWork& work, const DevicePair& devices, const SimParams& params,
                               double start_time) {
  devices.validate();
  const auto H = static_cast<std::uint64_t>(params.hidden_dim);
  const auto F = static_cast<std::uint64_t>(params.ffn_dim);
  const auto T = static_cast<std::uint64_t>(work.tokens);
  const auto E = static_cast<std::uint64_t>(params.num_experts);
  const DeviceProfile& cpu = devices.cpu;
  const DeviceKind accel = devices.npu.kind;

  Timeline tl(devices, params, start_time);

  // Attention plus the dense gate projection, one fixed-shape graph.
  const DeviceKind attn_dev = params.attention_device == DeviceKind::cpu ? DeviceKind::cpu : accel;
  const DeviceProfile& attn = devices.get(attn_dev);
  const std::uint64_t gate_macs = T * H * E;
  const auto& attention = tl.emit(attn_dev, Stage::attention_stub, std::nullopt, start_time,
                                  params.attention_cost + static_cast<double>(gate_macs) * attn.time_per_mac,
                                  gate_macs, attn_dev == DeviceKind::cpu ? 0 : 2 * T * H * sizeof(float), false);
  double ready = attention.end;

  // Softmax and top-k over the logits.
  const std::uint64_t router_ops = T * E;
  ready = tl.emit(DeviceKind::cpu, Stage::router, std::nullopt, ready,
                  static_cast<double>(router_ops) * cpu.time_per_mac, router_ops, 0, false)
              .end;

  // The host fills every static input buffer, padding included.
  for (std::size_t g = 0; g < work.groups.size(); ++g) {
    const auto& gw = work.groups[g];
    if (gw.rounds == 0) continue;
    const std::uint64_t elems = gw.rounds * gw.rows_per_round * H;
    ready = tl.emit(DeviceKind::cpu, Stage::pack, g, ready, static_cast<double>(elems) * cpu.time_per_mac, elems,
                    elems * sizeof(float), false)
                .end;
  }
  const double packed = ready;

  double experts_done = packed;
  for (std::size_t g = 0; g < work.groups.size(); ++g) {
    const auto& gw = work.groups[g];
    const DeviceKind dev = gw.device == DeviceKind::cpu ? DeviceKind::cpu : accel;
    const DeviceProfile& profile = devices.get(dev);
    const std::uint64_t macs = gw.rows_per_round * 2 * H * F;
    const double duration = profile.launch_overhead + (profile.charges_sync() ? profile.sync_overhead : 0.0) +
                            static_cast<double>(macs) * profile.time_per_mac_for(gw.rows_per_round);
    const std::uint64_t bytes = dev == DeviceKind::cpu ? 0 : 2 * gw.rows_per_round * H * sizeof(float);
    for (std::size_t r = 0; r < gw.rounds; ++r) {
      const auto& ev = tl.emit(dev, Stage::expert_ffn, g, packed, duration, macs, bytes, profile.charges_sync());
      experts_done = std::max(experts_done, ev.end);
    }
  }

  // Outputs return to the host before the weighted scatter.
  ready = std::max(experts_done, tl.free_at(DeviceKind::cpu));
  for (std::size_t g = 0; g < work.groups.size(); ++g) {
    const auto& gw = work.groups[g];
    if (gw.rounds == 0) continue;
    const std::uint64_t elems = gw.valid_rows * H;
    ready = tl.emit(DeviceKind::cpu, Stage::scatter, g, ready, static_cast<double>(elems) * cpu.time_per_mac, elems,
                    elems * sizeof(float), false)
                .end;
  }

  LayerSimulation sim;
  sim.events = tl.take();
  RunMetrics& m = sim.metrics;
  double end = start_time;
  for (const auto& ev : sim.events) {
    end = std::max(end, ev.end);
    m.stage_time[static_cast<std::size_t>(ev.stage)] += ev.duration();
    (ev.device == DeviceKind::cpu ? m.cpu_busy : m.accel_busy) += ev.duration();
    if (ev.stage == Stage::expert_ffn) {
      ++m.launches;
      if (ev.device != DeviceKind::cpu) ++m.accel_launches;
    }
    if (ev.sync) ++m.syncs;
  }
  sim.end_time = end;
  m.ttft = end - start_time;
  m.cpu_cycles = cpu_cycles_proxy(sim.events, params.orchestration_cost);
  m.tokens = work.tokens;
  m.padded_rows = work.padded_rows;
  m.dropped_tokens = work.dropped_tokens;
  m.routed_slots = work.routed_slots;
  const auto energy = energy_accounting(sim.events, devices, std::max<std::size_t>(work.tokens, 1));
  m.energy_compute = energy.compute;
  m.energy_comm = energy.comm;
  m.ept = work.tokens > 0 ? energy.ept : 0.0;
  return sim;
}

std::uint64_t cpu_cycles_proxy(std::span<const DispatchEvent> events, std::uint64_t orchestration_cost) {
  std::uint64_t total = 0;
  for (const auto& ev : events) {
    total += orchestration_cost;
    if (ev.device == DeviceKind::cpu) total += ev.macs;
  }
  return total;
}

EnergyBreakdown energy_accounting(std::span<const DispatchEvent> events, const DevicePair& devices,
                                  std::size_t tokens) {
  if (tokens == 0) throw ConfigError("energy_accounting: EPT is undefined for zero tokens");
  EnergyBreakdown out;
  for (const auto& ev : events) {
    const DeviceProfile& p = devices.get(ev.device);
    out.compute += static_cast<double>(ev.macs) * p.energy_per_mac;
    out.comm += static_cast<double>(ev.bytes_moved) * p.energy_per_byte;
    if (ev.sync) out.comm += p.sync_energy;
  }
  out.ept = (out.compute + out.comm) / static_cast<double>(tokens);
  return out;
}

DevicePair calibrate_device_profiles(const AnchorPoints& a) {
  if (!(a.npu_speedup > 0.0)) throw ConfigError("calibrate_device_profiles: npu speedup ratio must be > 0");
  if (!(a.sync_fraction >= 0.0 && a.sync_fraction < 1.0)) {
    throw ConfigError("calibrate_device_profiles: sync fraction must be in [0, 1)");
  }
  if (!(a.cpu_time_per_mac >= 0.0)) throw ConfigError("calibrate_device_profiles: cpu time_per_mac must be >= 0");
  if (a.reference_dispatches == 0) throw ConfigError("calibrate_device_profiles: reference needs >= 1 dispatch");

  DevicePair pair;
  pair.cpu.kind = DeviceKind::cpu;
  pair.cpu.time_per_mac = a.cpu_time_per_mac;
  pair.cpu.launch_overhead = a.cpu_launch_overhead;
  pair.cpu.energy_per_mac = a.cpu_energy_per_mac;
  pair.cpu.energy_per_byte = a.cpu_energy_per_byte;

  pair.npu.kind = DeviceKind::npu;
  pair.npu.time_per_mac = a.cpu_time_per_mac / a.npu_speedup;
  pair.npu.launch_overhead = a.npu_launch_overhead;
  pair.npu.energy_per_mac = a.npu_energy_per_mac;
  pair.npu.energy_per_byte = a.npu_energy_per_byte;
  pair.npu.sync_energy = a.sync_energy;
  pair.npu.graph_size_limit = a.graph_size_limit;

  const double macs_per_dispatch =
      static_cast<double>(a.reference_rows) * 2.0 * static_cast<double>(a.hidden_dim * a.ffn_dim);
  const double compute_time =
      static_cast<double>(a.reference_dispatches) * macs_per_dispatch * pair.npu.time_per_mac;
  pair.npu.sync_overhead =
      a.sync_fraction / (1.0 - a.sync_fraction) * compute_time / static_cast<double>(a.reference_dispatches);
  return pair;
}

}  // namespace tiermoe
