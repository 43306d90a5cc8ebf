// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tiermoe/core_model.hpp"
#include "tiermoe/trace.hpp"

namespace tiermoe {

inline constexpr int kProfileVersion = 1;

// Cumulative per-layer expert selection counts from offline profiling.
// Only raw counts are stored; ranks and imbalance ratios are derived.
struct CalibrationProfile {
  std::size_t num_experts = 0;
  std::size_t num_layers = 0;
  std::size_t top_k = 0;
  std::uint64_t total_tokens = 0;                  // tokens observed per layer
  std::vector<std::vector<std::uint64_t>> counts;  // [layer][expert]

  std::uint64_t layer_total(std::size_t layer) const;

  // Experts by descending count, ties to the lower id.
  std::vector<ExpertId> rank(std::size_t layer) const;

  // max_e n_e / mean_e n_e; 1 for a layer with no traffic.
  double imbalance_ratio(std::size_t layer) const;

  // Throws ValidationError when counts disagree with the declared shape.
  void validate() const;

  friend bool operator==(const CalibrationProfile&, const CalibrationProfile&) = default;
};

// Sums expert selections over all traces. Traces must agree on L, E and k.
CalibrationProfile profile_traces(std::span<const RoutingTrace> traces);

// Experts sorted by descending count (ties to lower id), first K kept.
std::vector<ExpertId> top_k_by_count(std::span<const std::uint64_t> counts, std::size_t K);

// |predicted ∩ observed| / K. Both sets must hold exactly K ids.
double overlap_at_k(std::span<const ExpertId> predicted, std::span<const ExpertId> observed, std::size_t K);

struct ProfileValidation {
  std::size_t K = 0;
  std::vector<double> per_layer;
  double median = 0.0;
  double mean = 0.0;
};

// Overlap@K per layer between the profile's top-K and the held-out trace's
// top-K by count.
ProfileValidation validate_profile(const CalibrationProfile& profile, const RoutingTrace& heldout, std::size_t K);

double median_of(std::vector<double> values);

void save_profile(const CalibrationProfile& profile, const std::filesystem::path& path);
CalibrationProfile load_profile(const std::filesystem::path& path);

}  // namespace tiermoe
