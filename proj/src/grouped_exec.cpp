// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "tiermoe/grouped_exec.hpp"

#include <algorithm>
#include <cstdint>
#include <exception>
#include <numeric>
#include <string>

#include "tiermoe/error.hpp"

namespace tiermoe {
namespace {

PackedBatch empty_batch(const ExpertGroup& group, std::size_t width) {
  PackedBatch batch;
  batch.expert_ids = group.expert_ids;
  batch.capacity = group.capacity;
  batch.buffer = Tensor2D(group.rows(), width);
  batch.occupancy.assign(group.size(), 0);
  batch.origin.resize(group.size());
  batch.dropped.resize(group.size());
  return batch;
}

void place(PackedBatch& batch, const Tensor2D& hidden, std::size_t slice, const RoutedToken& token) {
  const std::size_t row = slice * batch.capacity + batch.occupancy[slice];
  auto src = hidden.row(token.token);
  std::copy(src.begin(), src.end(), batch.buffer.row(row).begin());
  batch.origin[slice].push_back(token);
  ++batch.occupancy[slice];
}

void check_inputs(const Tensor2D& hidden, const RoutingTable& routing, const ExpertGroup& group,
                  std::span<const double> saliency) {
  group.validate();
  if (routing.num_tokens() != hidden.rows()) throw ConfigError("pack: routing and hidden disagree on token count");
  if (saliency.size() < hidden.rows()) throw ConfigError("pack: saliency does not cover every token");
  for (ExpertId e : group.expert_ids) {
    if (e >= routing.num_experts()) {
      throw ConfigError("pack: group expert " + std::to_string(e) + " is not in the routing table (E=" +
                        std::to_string(routing.num_experts()) + ")");
    }
  }
}

}  // namespace

void ExpertGroup::validate() const {
  if (expert_ids.empty()) throw ConfigError("ExpertGroup: a group needs at least one expert");
  if (capacity == 0) throw ConfigError("ExpertGroup: capacity must be >= 1");
  for (std::size_t i = 0; i < expert_ids.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (expert_ids[i] == expert_ids[j]) {
        throw ConfigError("ExpertGroup: expert " + std::to_string(expert_ids[i]) + " appears twice");
      }
    }
  }
}

std::size_t PackedBatch::valid_rows() const {
  return std::accumulate(occupancy.begin(), occupancy.end(), std::size_t{0});
}

std::size_t PackedBatch::dropped_count() const {
  std::size_t n = 0;
  for (const auto& d : dropped) n += d.size();
  return n;
}

PackedBatch pack(const Tensor2D& hidden, const RoutingTable& routing, const ExpertGroup& group,
                 std::span<const double> saliency) {
  check_inputs(hidden, routing, group, saliency);
  PackedBatch batch = empty_batch(group, hidden.cols());
  for (std::size_t g = 0; g < group.size(); ++g) {
    auto routed = routing.expert_tokens(group.expert_ids[g]);
    if (routed.size() <= group.capacity) {
      for (const auto& token : routed) place(batch, hidden, g, token);
      continue;
    }
    std::vector<TokenIndex> ids(routed.size());
    std::transform(routed.begin(), routed.end(), ids.begin(), [](const RoutedToken& r) { return r.token; });
    const PruneResult pruned = prune_overflow(ids, saliency, group.capacity);
    // Both lists are ascending, so one forward walk recovers the weights.
    std::size_t cursor = 0;
    for (TokenIndex keep : pruned.kept) {
      while (routed[cursor].token != keep) ++cursor;
      place(batch, hidden, g, routed[cursor]);
    }
    batch.dropped[g] = pruned.dropped;
  }
  return batch;
}

std::vector<PackedBatch> pack_rounds(const Tensor2D& hidden, const RoutingTable& routing,
                                     const ExpertGroup& group, std::span<const double> saliency,
                                     OverflowPolicy policy) {
  if (policy == OverflowPolicy::prune) return {pack(hidden, routing, group, saliency)};
  check_inputs(hidden, routing, group, saliency);
  std::size_t max_load = 0;
  for (ExpertId e : group.expert_ids) max_load = std::max(max_load, routing.load(e));
  const std::size_t rounds = std::max<std::size_t>(1, (max_load + group.capacity - 1) / group.capacity);
  std::vector<PackedBatch> batches;
  batches.reserve(rounds);
  for (std::size_t r = 0; r < rounds; ++r) {
    PackedBatch batch = empty_batch(group, hidden.cols());
    for (std::size_t g = 0; g < group.size(); ++g) {
      auto routed = routing.expert_tokens(group.expert_ids[g]);
      const std::size_t begin = std::min(routed.size(), r * group.capacity);
      const std::size_t end = std::min(routed.size(), begin + group.capacity);
      for (std::size_t i = begin; i < end; ++i) place(batch, hidden, g, routed[i]);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

Tensor2D execute_group(const PackedBatch& batch, std::span<const ExpertWeights> experts, kernels::Exec exec) {
  if (experts.size() != batch.group_size()) {
    throw ConfigError("execute_group: " + std::to_string(experts.size()) + " expert weights for a group of " +
                      std::to_string(batch.group_size()));
  }
  const std::size_t width = batch.buffer.cols();
  Tensor2D out(batch.buffer.rows(), width);
  for (std::size_t g = 0; g < batch.group_size(); ++g) {
    const std::size_t begin = g * batch.capacity;
    const Tensor2D y = ffn_forward(batch.buffer.slice_rows(begin, begin + batch.capacity), experts[g], exec);
    if (y.cols() != width) throw ConfigError("execute_group: expert output width does not match the buffer");
    std::copy(y.data().begin(), y.data().end(), out.row(begin).begin());
  }
  return out;
}

void weighted_scatter(const Tensor2D& output, const PackedBatch& batch, Tensor2D& accum) {
  const std::size_t width = accum.cols();
  TIERMOE_CHECK(output.cols() == width, "weighted_scatter: output width differs from accumulator");
  for (std::size_t g = 0; g < batch.group_size(); ++g) {
    TIERMOE_CHECK(batch.origin[g].size() == batch.occupancy[g], "weighted_scatter: origin/occupancy mismatch");
    for (std::size_t i = 0; i < batch.occupancy[g]; ++i) {
      const RoutedToken& o = batch.origin[g][i];
      TIERMOE_CHECK(o.token < accum.rows(), "weighted_scatter: origin token " + std::to_string(o.token) +
                                                " outside the chunk of " + std::to_string(accum.rows()));
      auto src = output.row(g * batch.capacity + i);
      auto dst = accum.row(o.token);
      for (std::size_t j = 0; j < width; ++j) dst[j] += o.weight * src[j];
    }
  }
}

void check_partition(std::span<const ExpertGroup> groups, std::size_t num_experts) {
  std::vector<int> seen(num_experts, 0);
  for (const auto& group : groups) {
    group.validate();
    for (ExpertId e : group.expert_ids) {
      if (e >= num_experts) throw ConfigError("groups reference expert " + std::to_string(e) + " >= E");
      if (seen[e]++ > 0) throw ConfigError("expert " + std::to_string(e) + " appears in more than one group");
    }
  }
  for (std::size_t e = 0; e < num_experts; ++e) {
    if (seen[e] == 0) throw ConfigError("expert " + std::to_string(e) + " is not covered by any group");
  }
}

GroupedResult grouped_moe_forward(const Tensor2D& hidden, const RoutingTable& routing, const CapacityPlan& plan,
                                  std::size_t layer, std::span<const ExpertGroup> groups,
                                  std::span<const ExpertWeights> experts, std::span<const double> saliency,
                                  kernels::Exec exec) {
  const std::size_t num_experts = routing.num_experts();
  check_partition(groups, num_experts);
  if (experts.size() < num_experts) throw ConfigError("grouped_moe_forward: missing expert weights");
  if (layer >= plan.num_layers() || plan.num_experts() != num_experts) {
    throw ConfigError("grouped_moe_forward: capacity plan does not cover this layer");
  }
  for (const auto& group : groups) {
    for (ExpertId e : group.expert_ids) {
      if (group.capacity < plan.at(layer, e)) {
        throw ConfigError("grouped_moe_forward: group capacity " + std::to_string(group.capacity) +
                          " is below expert " + std::to_string(e) + "'s planned capacity");
      }
    }
  }

  std::vector<std::vector<PackedBatch>> batches(groups.size());
  std::vector<std::vector<Tensor2D>> outputs(groups.size());
  auto run_group = [&](std::size_t i) {
    const auto& group = groups[i];
    std::vector<ExpertWeights> members;
    members.reserve(group.size());
    for (ExpertId e : group.expert_ids) members.push_back(experts[e]);
    batches[i] = pack_rounds(hidden, routing, group, saliency, plan.policy);
    for (const auto& batch : batches[i]) outputs[i].push_back(execute_group(batch, members, exec));
  };
  if (exec == kernels::Exec::parallel) {
    const auto n = static_cast<std::int64_t>(groups.size());
    // Exceptions must not escape the parallel region; keep the first one.
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
      try {
        run_group(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical(tiermoe_grouped_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  } else {
    for (std::size_t i = 0; i < groups.size(); ++i) run_group(i);
  }

  GroupedResult result{Tensor2D(hidden.rows(), hidden.cols()), {}};
  auto& stats = result.stats;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    GroupExecution exec_info;
    exec_info.group_index = i;
    exec_info.rounds = batches[i].size();
    exec_info.rows_per_round = groups[i].rows();
    for (std::size_t r = 0; r < batches[i].size(); ++r) {
      const auto& batch = batches[i][r];
      weighted_scatter(outputs[i][r], batch, result.out);
      exec_info.valid_rows += batch.valid_rows();
      exec_info.padded_rows += batch.padded_rows();
      exec_info.dropped += batch.dropped_count();
      for (std::size_t g = 0; g < batch.group_size(); ++g) {
        for (TokenIndex t : batch.dropped[g]) stats.drops.emplace_back(t, batch.expert_ids[g]);
      }
    }
    stats.padded_rows += exec_info.padded_rows;
    stats.dropped_tokens += exec_info.dropped;
    stats.packed_tokens += exec_info.valid_rows;
    stats.launches += exec_info.rounds;
    stats.groups.push_back(exec_info);
  }
  TIERMOE_CHECK(stats.packed_tokens + stats.dropped_tokens == routing.num_tokens() * routing.top_k(),
                "token accounting: packed " + std::to_string(stats.packed_tokens) + " + dropped " +
                    std::to_string(stats.dropped_tokens) + " != T*k = " +
                    std::to_string(routing.num_tokens() * routing.top_k()));
  return result;
}

}  // namespace tiermoe
