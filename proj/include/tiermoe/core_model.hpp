// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tiermoe/kernels.hpp"
#include "tiermoe/tensor.hpp"

namespace tiermoe {

using ExpertId = std::uint32_t;
using TokenIndex = std::uint32_t;

struct MoELayerConfig {
  std::size_t num_experts = 16;
  std::size_t top_k = 2;
  std::size_t hidden_dim = 64;
  std::size_t ffn_dim = 128;

  void validate() const;
};

// Bias-free two-layer expert FFN: silu(x * w_up) * w_down.
struct ExpertWeights {
  Tensor2D w_up;    // H x F
  Tensor2D w_down;  // F x H

  std::size_t hidden_dim() const { return w_up.rows(); }
  std::size_t ffn_dim() const { return w_up.cols(); }
};

struct GateChoice {
  ExpertId expert = 0;
  float weight = 0.0f;
};

struct RoutedToken {
  TokenIndex token = 0;
  float weight = 0.0f;
};

// Per-token top-k assignments plus the inverse per-expert token lists.
class RoutingTable {
 public:
  enum class WeightCheck {
    normalized,  // positive, summing to 1 within 1e-5
    positive,    // any positive weights
  };

  RoutingTable() = default;
  RoutingTable(std::size_t num_experts, std::vector<std::vector<GateChoice>> per_token,
               WeightCheck check = WeightCheck::normalized);

  std::size_t num_tokens() const { return per_token_.size(); }
  std::size_t num_experts() const { return per_expert_.size(); }
  std::size_t top_k() const { return top_k_; }

  std::span<const GateChoice> token(std::size_t t) const { return per_token_[t]; }
  // Tokens routed to expert e in ascending token order.
  std::span<const RoutedToken> expert_tokens(ExpertId e) const { return per_expert_[e]; }
  std::size_t load(ExpertId e) const { return per_expert_[e].size(); }
  std::vector<std::size_t> loads() const;

  // Rows [begin, end) of this table, re-indexed from zero.
  RoutingTable slice_tokens(std::size_t begin, std::size_t end) const;

 private:
  std::size_t top_k_ = 0;
  std::vector<std::vector<GateChoice>> per_token_;
  std::vector<std::vector<RoutedToken>> per_expert_;
};

// Softmax over all experts, top-k by probability (ties to lower id), then
// renormalize the selected weights to sum to one.
RoutingTable route_topk(const Tensor2D& hidden, const Tensor2D& router_w, std::size_t k);

Tensor2D ffn_forward(const Tensor2D& x, const ExpertWeights& w,
                     kernels::Exec exec = kernels::Exec::parallel);

// Dynamic-shape oracle: every expert runs on exactly the tokens routed to it,
// with serial kernels, and outputs are combined by gate weight.
Tensor2D reference_moe_forward(const Tensor2D& hidden, const RoutingTable& routing,
                               std::span<const ExpertWeights> experts);

// Per-row L2 norm.
std::vector<double> l2_saliency(const Tensor2D& activations);

// Uniform(-scale, scale) entries.
Tensor2D random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng, float scale);

// Expert weights scaled by 1/sqrt(fan_in) so activations stay O(1).
std::vector<ExpertWeights> random_experts(const MoELayerConfig& config, std::mt19937_64& rng);

}  // namespace tiermoe
