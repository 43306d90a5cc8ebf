// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tiermoe/capacity.hpp"
#include "tiermoe/device_sim.hpp"
#include "tiermoe/workload.hpp"

namespace tiermoe {

// Execution strategies, from the all-host baseline up the ablation ladder.
enum class Mode {
  cpu_only,       // every stage on the host with dynamic shapes
  naive_offload,  // one accelerator graph per expert at worst-case capacity
  ours_base,      // one graph per expert at a uniform calibrated capacity
  ours_t,         // + capacity tiers
  ours_tg,        // + grouped execution
  ours_all,       // + hot/cold residency and load-aware placement
};

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);
const std::vector<Mode>& all_modes();

struct RunConfig {
  // Model.
  std::size_t num_experts = 16;
  std::size_t top_k = 2;
  std::size_t hidden_dim = 64;
  std::size_t ffn_dim = 128;
  std::size_t num_layers = 4;

  // Prefill.
  std::size_t prompt_length = 1024;
  std::size_t chunk_size = 256;

  // Capacity, grouping, residency.
  std::vector<std::uint32_t> tier_multipliers{4, 2, 1};
  std::size_t group_size = 4;
  double hot_fraction = 0.25;
  OverflowPolicy overflow = OverflowPolicy::prune;
  std::uint32_t capacity_override = 0;  // > 0: uniform capacity for every static mode
  bool allow_cpu_fallback = true;

  // Devices and simulation.
  AnchorPoints anchors;
  std::size_t small_rows_threshold = 0;
  double small_rows_penalty = 1.0;
  double attention_cost = 2000.0;
  std::uint64_t orchestration_cost = kDefaultOrchestrationCost;

  // Workload.
  Mode mode = Mode::ours_all;
  std::uint64_t seed = 1;
  double zipf_s = 0.6;
  double layer_jitter = 0.25;
  std::size_t calibration_tokens = 0;  // 0: same as prompt_length
  std::size_t overlap_k = 8;
  bool verify = true;

  void validate() const;
  DevicePair devices() const;
  MoELayerConfig layer_config() const { return {num_experts, top_k, hidden_dim, ffn_dim}; }
  WorkloadParams workload(std::size_t tokens) const;
};

nlohmann::ordered_json to_json(const RunConfig& config);

}  // namespace tiermoe
