// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "tiermoe/trace.hpp"

namespace tiermoe {

inline constexpr int kTraceVersion = 1;

struct WorkloadParams {
  std::uint64_t seed = 1;
  std::size_t tokens = 1024;
  std::size_t num_layers = 4;
  std::size_t num_experts = 16;
  std::size_t top_k = 2;
  double zipf_s = 0.6;        // 0 is uniform popularity
  double layer_jitter = 0.25;  // share of E random transpositions applied per layer
};

// Skewed synthetic routing. A Zipf(s) popularity vector is laid over a
// seeded expert permutation; each layer perturbs that permutation by
// round(jitter * E) random transpositions. Each token draws k distinct
// experts without replacement, proportional to popularity, with positive
// gate weights that sum to one. Fully determined by params.
RoutingTrace generate_workload(const WorkloadParams& params);

// Newline-delimited JSON: a header {"version","E","L","k"} followed by one
// {"layer","token","experts","weights"} record per line.
void export_trace(const RoutingTrace& trace, const std::filesystem::path& path);

// Validates every record; errors name the offending line. An empty file is
// an empty trace.
RoutingTrace ingest_trace(const std::filesystem::path& path);

}  // namespace tiermoe
