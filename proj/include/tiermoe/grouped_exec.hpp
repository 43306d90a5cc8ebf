// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "tiermoe/capacity.hpp"
#include "tiermoe/core_model.hpp"
#include "tiermoe/kernels.hpp"

namespace tiermoe {

// G experts compiled into one static graph; every member runs at `capacity` rows.
struct ExpertGroup {
  std::vector<ExpertId> expert_ids;
  std::uint32_t capacity = 0;

  std::size_t size() const { return expert_ids.size(); }
  std::size_t rows() const { return expert_ids.size() * capacity; }
  void validate() const;

  friend bool operator==(const ExpertGroup&, const ExpertGroup&) = default;
};

// Static (G*C) x H input block. Slice g owns rows [g*C, (g+1)*C): its first
// occupancy[g] rows hold routed tokens in ascending token order and the rest
// are zero.
struct PackedBatch {
  std::vector<ExpertId> expert_ids;
  std::uint32_t capacity = 0;
  Tensor2D buffer;
  std::vector<std::uint32_t> occupancy;
  std::vector<std::vector<RoutedToken>> origin;
  std::vector<std::vector<TokenIndex>> dropped;

  std::size_t group_size() const { return expert_ids.size(); }
  std::size_t valid_rows() const;
  std::size_t padded_rows() const { return group_size() * capacity - valid_rows(); }
  std::size_t dropped_count() const;
};

// Single static invocation: tokens beyond capacity are pruned by saliency.
PackedBatch pack(const Tensor2D& hidden, const RoutingTable& routing, const ExpertGroup& group,
                 std::span<const double> saliency);

// One batch per invocation. Under prune this is exactly pack(); under
// pad-only the expert lists are tiled over ceil(max_load / C) invocations
// and nothing is dropped.
std::vector<PackedBatch> pack_rounds(const Tensor2D& hidden, const RoutingTable& routing,
                                     const ExpertGroup& group, std::span<const double> saliency,
                                     OverflowPolicy policy);

// Runs slice g through experts[g]; the output keeps the buffer layout.
Tensor2D execute_group(const PackedBatch& batch, std::span<const ExpertWeights> experts,
                       kernels::Exec exec = kernels::Exec::parallel);

// accum[token] += weight * output[g*C + i] for the first occupancy[g] rows of
// each slice. Padded rows are never read.
void weighted_scatter(const Tensor2D& output, const PackedBatch& batch, Tensor2D& accum);

// What one group cost at execution time; feeds the device simulator.
struct GroupExecution {
  std::size_t group_index = 0;
  std::size_t rounds = 0;          // static invocations
  std::size_t rows_per_round = 0;  // G*C
  std::size_t valid_rows = 0;      // tokens actually packed, all rounds
  std::size_t padded_rows = 0;
  std::size_t dropped = 0;
};

struct GroupedStats {
  std::size_t padded_rows = 0;
  std::size_t dropped_tokens = 0;
  std::size_t packed_tokens = 0;
  std::size_t launches = 0;
  std::vector<GroupExecution> groups;
  std::vector<std::pair<TokenIndex, ExpertId>> drops;  // (token, expert) pairs pruned
};

struct GroupedResult {
  Tensor2D out;
  GroupedStats stats;
};

// Throws ConfigError unless groups partition [0, E) exactly once.
void check_partition(std::span<const ExpertGroup> groups, std::size_t num_experts);

// Full layer: pack -> execute -> scatter for every group. Groups execute
// concurrently under Exec::parallel; scatter always runs in group order so
// the result is bit-identical across executors.
GroupedResult grouped_moe_forward(const Tensor2D& hidden, const RoutingTable& routing, const CapacityPlan& plan,
                                  std::size_t layer, std::span<const ExpertGroup> groups,
                                  std::span<const ExpertWeights> experts, std::span<const double> saliency,
                                  kernels::Exec exec = kernels::Exec::parallel);

}  // namespace tiermoe
