// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "tiermoe/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tiermoe/error.hpp"

namespace tiermoe {
namespace {

// Guards ceil() against representation error, e.g. 2.0 * 256 / 8 landing a
// hair above 64.
constexpr double kCeilSlack = 1e-9;

}  // namespace

std::uint32_t align_capacity(double raw) {
  if (!std::isfinite(raw) || raw < 0.0) throw ConfigError("align_capacity: raw capacity must be finite and >= 0");
  const auto whole = static_cast<std::uint64_t>(std::ceil(raw - kCeilSlack));
  const std::uint64_t blocks = std::max<std::uint64_t>(1, (whole + kCapacityAlignment - 1) / kCapacityAlignment);
  return static_cast<std::uint32_t>(blocks * kCapacityAlignment);
}

std::string_view to_string(OverflowPolicy policy) {
  return policy == OverflowPolicy::pad_only ? "pad-only" : "prune";
}

OverflowPolicy parse_overflow_policy(std::string_view text) {
  if (text == "pad-only") return OverflowPolicy::pad_only;
  if (text == "prune") return OverflowPolicy::prune;
  throw ConfigError("unknown overflow policy '" + std::string(text) + "' (expected pad-only or prune)");
}

TierSet::TierSet(std::vector<std::uint32_t> capacities) : capacities_(std::move(capacities)) {
  for (std::size_t i = 0; i < capacities_.size(); ++i) {
    const auto c = capacities_[i];
    if (c == 0 || c % kCapacityAlignment != 0) {
      throw ConfigError("TierSet: capacity " + std::to_string(c) + " is not a positive multiple of 16");
    }
    if (i > 0 && c >= capacities_[i - 1]) throw ConfigError("TierSet: capacities must be strictly descending");
  }
}

TierSet::Choice TierSet::tier_for_load(double load) const {
  if (capacities_.empty()) throw ConfigError("TierSet: empty tier set");
  for (auto it = capacities_.rbegin(); it != capacities_.rend(); ++it) {
    if (load <= static_cast<double>(*it)) return {*it, false};
  }
  return {capacities_.front(), true};
}

double base_capacity(std::size_t chunk_tokens, std::size_t top_k, std::size_t num_experts) {
  if (num_experts == 0) throw ConfigError("base_capacity: E must be >= 1");
  return static_cast<double>(chunk_tokens) * static_cast<double>(top_k) / static_cast<double>(num_experts);
}

std::uint32_t estimate_max_load(std::size_t routed_slots, std::size_t num_experts, double imbalance_ratio) {
  if (routed_slots == 0 || num_experts == 0) throw ConfigError("estimate_max_load: B and E must be >= 1");
  if (!(imbalance_ratio >= 1.0)) throw ConfigError("estimate_max_load: imbalance ratio must be >= 1");
  return align_capacity(imbalance_ratio * static_cast<double>(routed_slots) / static_cast<double>(num_experts));
}

TierSet derive_tier_set(double base, std::span<const std::uint32_t> multipliers) {
  if (!(base >= 1.0)) throw ConfigError("derive_tier_set: base capacity must be >= 1");
  if (multipliers.empty()) throw ConfigError("derive_tier_set: no multipliers");
  std::vector<std::uint32_t> caps;
  for (std::size_t i = 0; i < multipliers.size(); ++i) {
    if (multipliers[i] == 0) throw ConfigError("derive_tier_set: multipliers must be positive");
    if (i > 0 && multipliers[i] >= multipliers[i - 1]) {
      throw ConfigError("derive_tier_set: multipliers must be strictly descending");
    }
    const auto c = align_capacity(multipliers[i] * base);
    if (caps.empty() || caps.back() != c) caps.push_back(c);
  }
  return TierSet(std::move(caps));
}

CapacityPlan assign_tiers(const CalibrationProfile& profile, const TierSet& tiers, std::size_t chunk_tokens,
                          OverflowPolicy policy) {
  if (tiers.empty()) throw ConfigError("assign_tiers: empty tier set");
  if (chunk_tokens == 0) throw ConfigError("assign_tiers: chunk size must be >= 1");
  CapacityPlan plan;
  plan.tiers = tiers;
  plan.chunk_tokens = chunk_tokens;
  plan.policy = policy;
  for (std::size_t l = 0; l < profile.num_layers; ++l) {
    std::vector<std::uint32_t> caps(profile.num_experts);
    std::vector<double> loads(profile.num_experts, 0.0);
    std::vector<bool> flagged(profile.num_experts, false);
    for (std::size_t e = 0; e < profile.num_experts; ++e) {
      if (profile.total_tokens > 0) {
        loads[e] = static_cast<double>(chunk_tokens) * static_cast<double>(profile.counts[l][e]) /
                   static_cast<double>(profile.total_tokens);
      }
      const auto choice = tiers.tier_for_load(loads[e]);
      caps[e] = choice.capacity;
      flagged[e] = choice.overflow;
    }
    plan.capacity.push_back(std::move(caps));
    plan.expected_load.push_back(std::move(loads));
    plan.overflow_flagged.push_back(std::move(flagged));
  }
  return plan;
}

CapacityPlan uniform_plan(std::size_t num_layers, std::size_t num_experts, std::uint32_t capacity,
                          std::size_t chunk_tokens, OverflowPolicy policy) {
  CapacityPlan plan;
  plan.tiers = TierSet({capacity});
  plan.chunk_tokens = chunk_tokens;
  plan.policy = policy;
  plan.capacity.assign(num_layers, std::vector<std::uint32_t>(num_experts, capacity));
  plan.expected_load.assign(num_layers, std::vector<double>(num_experts, 0.0));
  plan.overflow_flagged.assign(num_layers, std::vector<bool>(num_experts, false));
  return plan;
}

std::size_t overflow(std::size_t routed, std::size_t capacity) {
  return routed > capacity ? routed - capacity : 0;
}

std::size_t padded_rows(std::span<const std::uint32_t> capacities, std::span<const std::size_t> loads) {
  if (capacities.size() != loads.size()) throw ConfigError("padded_rows: length mismatch");
  std::size_t total = 0;
  for (std::size_t e = 0; e < loads.size(); ++e) {
    total += capacities[e] - std::min<std::size_t>(loads[e], capacities[e]);
  }
  return total;
}

PruneResult prune_overflow(std::span<const TokenIndex> token_ids, std::span<const double> saliency,
                           std::size_t capacity) {
  for (TokenIndex t : token_ids) {
    if (t >= saliency.size()) throw ConfigError("prune_overflow: no saliency for token " + std::to_string(t));
  }
  PruneResult result;
  if (token_ids.size() <= capacity) {
    result.kept.assign(token_ids.begin(), token_ids.end());
    std::sort(result.kept.begin(), result.kept.end());
    return result;
  }
  std::vector<TokenIndex> order(token_ids.begin(), token_ids.end());
  std::sort(order.begin(), order.end(), [&](TokenIndex a, TokenIndex b) {
    if (saliency[a] != saliency[b]) return saliency[a] > saliency[b];
    return a < b;
  });
  result.kept.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(capacity));
  result.dropped.assign(order.begin() + static_cast<std::ptrdiff_t>(capacity), order.end());
  std::sort(result.kept.begin(), result.kept.end());
  std::sort(result.dropped.begin(), result.dropped.end());
  return result;
}

}  // namespace tiermoe
