// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tiermoe/calibration.hpp"
#include "tiermoe/capacity.hpp"
#include "tiermoe/core_model.hpp"
#include "tiermoe/device_sim.hpp"
#include "tiermoe/residency.hpp"
#include "tiermoe/run_config.hpp"
#include "tiermoe/trace.hpp"

namespace tiermoe {

// Seeded token embeddings and per-layer expert weights.
struct SyntheticModel {
  Tensor2D embeddings;                             // tokens x H
  std::vector<std::vector<ExpertWeights>> experts;  // [layer][expert]
};

SyntheticModel make_model(const RunConfig& config, std::size_t tokens);

// Capacities, groups and device placement fixed ahead of the run.
struct StaticPlan {
  Mode mode = Mode::ours_all;
  std::optional<CapacityPlan> capacity;  // empty for cpu-only
  PlacementPlan placement;
};

// Worst-case per-layer load of any expert in any chunk of the trace.
std::vector<std::size_t> worst_case_loads(const RoutingTrace& trace, std::size_t chunk_size);

// The naive mode needs the prompt trace for its worst-case capacity; every
// other mode is derived from the profile alone.
StaticPlan build_static_plan(const RunConfig& config, const CalibrationProfile& profile,
                             const RoutingTrace* prompt = nullptr);

struct LayerRow {
  std::size_t chunk = 0;
  std::size_t layer = 0;
  RunMetrics metrics;
  double max_rel_err = 0.0;  // vs the dynamic oracle, tokens with no drops
};

struct RunReport {
  RunConfig config;
  std::size_t num_chunks = 0;
  std::vector<LayerRow> rows;
  std::vector<RunMetrics> chunk_totals;
  RunMetrics aggregate;
  StaticPlan plan;
  std::vector<double> imbalance_ratios;  // calibration profile, per layer
  ProfileValidation calibration;
  double max_rel_err = 0.0;
  Tensor2D final_hidden;  // residual stream after the last layer, prompt order
};

struct PrefillInputs {
  const RoutingTrace* prompt = nullptr;          // replayed instead of a generated workload
  const CalibrationProfile* profile = nullptr;   // replaces on-the-fly calibration
};

// Chunked prefill: for each chunk of chunk_size tokens and each layer,
// replay routing, execute the layer under the configured mode, check it
// against the dynamic oracle, and simulate its cost. A generated workload
// spends its first calibration_tokens tokens on offline calibration.
RunReport run_prefill(const RunConfig& config, const PrefillInputs& inputs = {});

enum class SweepAxis { capacity, group_size, chunk_size };
std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view text);

struct SweepPoint {
  std::uint64_t value = 0;
  std::optional<RunReport> report;
  std::string error;  // set when the run failed
};

struct SweepResult {
  SweepAxis axis = SweepAxis::capacity;
  std::vector<SweepPoint> points;
};

// One run per value; failures are recorded and the sweep continues.
SweepResult sweep(const RunConfig& base, SweepAxis axis, std::span<const std::uint64_t> values,
                  const PrefillInputs& inputs = {});

}  // namespace tiermoe
