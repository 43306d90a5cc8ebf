// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "tiermoe/calibration.hpp"
#include "tiermoe/core_model.hpp"

namespace tiermoe {

// Static expert capacities are multiples of this row count.
inline constexpr std::uint32_t kCapacityAlignment = 16;

// Smallest positive multiple of kCapacityAlignment that is >= raw.
std::uint32_t align_capacity(double raw);

enum class OverflowPolicy {
  pad_only,  // never drop; overflow rows run in extra invocations of the same graph
  prune,     // drop the lowest-saliency tokens beyond capacity
};

std::string_view to_string(OverflowPolicy policy);
OverflowPolicy parse_overflow_policy(std::string_view text);

// Strictly descending, 16-aligned capacities. capacities()[0] is the largest tier.
class TierSet {
 public:
  TierSet() = default;
  explicit TierSet(std::vector<std::uint32_t> capacities);

  std::span<const std::uint32_t> capacities() const { return capacities_; }
  std::size_t size() const { return capacities_.size(); }
  bool empty() const { return capacities_.empty(); }
  std::uint32_t largest() const { return capacities_.front(); }
  std::uint32_t smallest() const { return capacities_.back(); }

  struct Choice {
    std::uint32_t capacity = 0;
    bool overflow = false;  // load exceeds the largest tier
  };
  // Smallest tier >= load; the largest tier (flagged) when none fits.
  Choice tier_for_load(double load) const;

  friend bool operator==(const TierSet&, const TierSet&) = default;

 private:
  std::vector<std::uint32_t> capacities_;
};

// Average per-expert routed load of a chunk under balanced routing.
double base_capacity(std::size_t chunk_tokens, std::size_t top_k, std::size_t num_experts);

// Busiest-expert estimate ceil(r * slots / E), aligned up to 16.
std::uint32_t estimate_max_load(std::size_t routed_slots, std::size_t num_experts, double imbalance_ratio);

// multiplier * base for each multiplier, aligned; duplicates collapse.
TierSet derive_tier_set(double base, std::span<const std::uint32_t> multipliers);

struct CapacityPlan {
  TierSet tiers;
  std::size_t chunk_tokens = 0;
  OverflowPolicy policy = OverflowPolicy::prune;
  std::vector<std::vector<std::uint32_t>> capacity;  // [layer][expert]
  std::vector<std::vector<double>> expected_load;    // [layer][expert], tokens per chunk
  std::vector<std::vector<bool>> overflow_flagged;   // [layer][expert]

  std::size_t num_layers() const { return capacity.size(); }
  std::size_t num_experts() const { return capacity.empty() ? 0 : capacity.front().size(); }
  std::uint32_t at(std::size_t layer, ExpertId e) const { return capacity.at(layer).at(e); }
};

// Expected per-chunk load of expert e is chunk_tokens * n_e / total_tokens
// (its per-token selection frequency times the chunk size); each expert gets
// the smallest tier that holds it.
CapacityPlan assign_tiers(const CalibrationProfile& profile, const TierSet& tiers, std::size_t chunk_tokens,
                          OverflowPolicy policy = OverflowPolicy::prune);

// Every expert of every layer at the same capacity.
CapacityPlan uniform_plan(std::size_t num_layers, std::size_t num_experts, std::uint32_t capacity,
                          std::size_t chunk_tokens, OverflowPolicy policy);

// max(0, n - C).
std::size_t overflow(std::size_t routed, std::size_t capacity);

// Rows executed but carrying no token: sum_e (C_e - min(n_e, C_e)).
std::size_t padded_rows(std::span<const std::uint32_t> capacities, std::span<const std::size_t> loads);

struct PruneResult {
  std::vector<TokenIndex> kept;     // ascending token order
  std::vector<TokenIndex> dropped;  // ascending token order
};

// Keeps the `capacity` highest-saliency tokens (ties keep the lower index).
// saliency is indexed by token index.
PruneResult prune_overflow(std::span<const TokenIndex> token_ids, std::span<const double> saliency,
                           std::size_t capacity);

}  // namespace tiermoe
