// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "tiermoe/run_config.hpp"

#include <string>

#include "tiermoe/error.hpp"

namespace tiermoe {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::cpu_only: return "cpu-only";
    case Mode::naive_offload: return "naive-offload";
    case Mode::ours_base: return "ours-base";
    case Mode::ours_t: return "ours-T";
    case Mode::ours_tg: return "ours-TG";
    case Mode::ours_all: return "ours-all";
  }
  return "?";
}

const std::vector<Mode>& all_modes() {
  static const std::vector<Mode> modes{Mode::cpu_only, Mode::naive_offload, Mode::ours_base,
                                       Mode::ours_t,   Mode::ours_tg,       Mode::ours_all};
  return modes;
}

Mode parse_mode(std::string_view text) {
  for (Mode m : all_modes()) {
    if (text == to_string(m)) return m;
  }
  throw ConfigError("unknown mode '" + std::string(text) +
                    "' (expected cpu-only, naive-offload, ours-base, ours-T, ours-TG or ours-all)");
}

void RunConfig::validate() const {
  layer_config().validate();
  if (num_layers == 0) throw ConfigError("layers must be >= 1");
  if (chunk_size == 0 || prompt_length == 0) throw ConfigError("prompt length and chunk size must be >= 1");
  if (chunk_size > prompt_length) {
    throw ConfigError("chunk size " + std::to_string(chunk_size) + " exceeds prompt length " +
                      std::to_string(prompt_length));
  }
  if (group_size == 0) throw ConfigError("group size must be >= 1");
  if (!(hot_fraction > 0.0 && hot_fraction <= 1.0)) throw ConfigError("hot fraction must be in (0, 1]");
  if (tier_multipliers.empty()) throw ConfigError("at least one tier multiplier is required");
  if (capacity_override % kCapacityAlignment != 0) {
    throw ConfigError("capacity override must be a multiple of 16");
  }
  if (overlap_k == 0 || overlap_k > num_experts) throw ConfigError("overlap K must be in [1, E]");
  if (!(zipf_s >= 0.0)) throw ConfigError("zipf skew must be >= 0");
  devices().validate();
}

DevicePair RunConfig::devices() const {
  AnchorPoints a = anchors;
  a.hidden_dim = hidden_dim;
  a.ffn_dim = ffn_dim;
  DevicePair pair = calibrate_device_profiles(a);
  pair.npu.small_rows_threshold = small_rows_threshold;
  pair.npu.small_rows_penalty = small_rows_penalty;
  return pair;
}

WorkloadParams RunConfig::workload(std::size_t tokens) const {
  return {seed, tokens, num_layers, num_experts, top_k, zipf_s, layer_jitter};
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(c.mode);
  j["experts"] = c.num_experts;
  j["top-k"] = c.top_k;
  j["hidden"] = c.hidden_dim;
  j["ffn"] = c.ffn_dim;
  j["layers"] = c.num_layers;
  j["prompt-length"] = c.prompt_length;
  j["chunk-size"] = c.chunk_size;
  j["tiers"] = c.tier_multipliers;
  j["group-size"] = c.group_size;
  j["hot-fraction"] = c.hot_fraction;
  j["overflow"] = to_string(c.overflow);
  j["capacity"] = c.capacity_override;
  j["cpu-fallback"] = c.allow_cpu_fallback;
  j["cpu-time-per-mac"] = c.anchors.cpu_time_per_mac;
  j["npu-speedup"] = c.anchors.npu_speedup;
  j["sync-fraction"] = c.anchors.sync_fraction;
  j["reference-dispatches"] = c.anchors.reference_dispatches;
  j["reference-rows"] = c.anchors.reference_rows;
  j["npu-launch"] = c.anchors.npu_launch_overhead;
  j["cpu-launch"] = c.anchors.cpu_launch_overhead;
  j["cpu-energy-per-mac"] = c.anchors.cpu_energy_per_mac;
  j["npu-energy-per-mac"] = c.anchors.npu_energy_per_mac;
  j["cpu-energy-per-byte"] = c.anchors.cpu_energy_per_byte;
  j["npu-energy-per-byte"] = c.anchors.npu_energy_per_byte;
  j["sync-energy"] = c.anchors.sync_energy;
  j["graph-limit"] = c.anchors.graph_size_limit;
  j["small-rows-threshold"] = c.small_rows_threshold;
  j["small-rows-penalty"] = c.small_rows_penalty;
  j["attention-cost"] = c.attention_cost;
  j["orchestration-cost"] = c.orchestration_cost;
  j["seed"] = c.seed;
  j["zipf-s"] = c.zipf_s;
  j["jitter"] = c.layer_jitter;
  j["calibration-tokens"] = c.calibration_tokens;
  j["overlap-k"] = c.overlap_k;
  j["verify"] = c.verify;
  return j;
}

}  // namespace tiermoe
