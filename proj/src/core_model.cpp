// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "tiermoe/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tiermoe/error.hpp"

namespace tiermoe {

void MoELayerConfig::validate() const {
  if (num_experts == 0) throw ConfigError("num_experts must be >= 1");
  if (top_k == 0 || top_k > num_experts) {
    throw ConfigError("top_k must satisfy 1 <= k <= E (k=" + std::to_string(top_k) +
                      ", E=" + std::to_string(num_experts) + ")");
  }
  if (hidden_dim == 0 || ffn_dim == 0) throw ConfigError("hidden_dim and ffn_dim must be >= 1");
}

RoutingTable::RoutingTable(std::size_t num_experts, std::vector<std::vector<GateChoice>> per_token,
                           WeightCheck check)
    : per_token_(std::move(per_token)), per_expert_(num_experts) {
  if (num_experts == 0) throw ConfigError("RoutingTable: num_experts must be >= 1");
  top_k_ = per_token_.empty() ? 0 : per_token_.front().size();
  for (std::size_t t = 0; t < per_token_.size(); ++t) {
    const auto& choices = per_token_[t];
    if (choices.size() != top_k_ || top_k_ == 0 || top_k_ > num_experts) {
      throw ConfigError("RoutingTable: token " + std::to_string(t) + " has " +
                        std::to_string(choices.size()) + " experts, expected k=" + std::to_string(top_k_));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < choices.size(); ++i) {
      const auto& c = choices[i];
      if (c.expert >= num_experts) {
        throw ConfigError("RoutingTable: token " + std::to_string(t) + " routed to expert " +
                          std::to_string(c.expert) + " >= E=" + std::to_string(num_experts));
      }
      if (!(c.weight > 0.0f) || !std::isfinite(c.weight)) {
        throw ConfigError("RoutingTable: token " + std::to_string(t) + " has a non-positive gate weight");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (choices[j].expert == c.expert) {
          throw ConfigError("RoutingTable: token " + std::to_string(t) + " selects expert " +
                            std::to_string(c.expert) + " twice");
        }
      }
      sum += c.weight;
    }
    if (check == WeightCheck::normalized && std::abs(sum - 1.0) > 1e-5) {
      throw ConfigError("RoutingTable: gate weights of token " + std::to_string(t) + " sum to " +
                        std::to_string(sum));
    }
    for (const auto& c : choices) {
      per_expert_[c.expert].push_back({static_cast<TokenIndex>(t), c.weight});
    }
  }
}

std::vector<std::size_t> RoutingTable::loads() const {
  std::vector<std::size_t> out(per_expert_.size());
  for (std::size_t e = 0; e < out.size(); ++e) out[e] = per_expert_[e].size();
  return out;
}

RoutingTable RoutingTable::slice_tokens(std::size_t begin, std::size_t end) const {
  if (begin > end || end > per_token_.size()) throw ConfigError("RoutingTable::slice_tokens: bad range");
  std::vector<std::vector<GateChoice>> sub(per_token_.begin() + static_cast<std::ptrdiff_t>(begin),
                                           per_token_.begin() + static_cast<std::ptrdiff_t>(end));
  return {per_expert_.size(), std::move(sub), WeightCheck::positive};
}

RoutingTable route_topk(const Tensor2D& hidden, const Tensor2D& router_w, std::size_t k) {
  if (hidden.cols() != router_w.rows()) {
    throw ConfigError("route_topk: hidden has " + std::to_string(hidden.cols()) +
                      " columns but router expects " + std::to_string(router_w.rows()));
  }
  const std::size_t num_experts = router_w.cols();
  if (k == 0 || k > num_experts) throw ConfigError("route_topk: k must satisfy 1 <= k <= E");

  const Tensor2D logits = kernels::matmul_serial(hidden, router_w);
  std::vector<std::vector<GateChoice>> per_token(hidden.rows());
  std::vector<double> probs(num_experts);
  std::vector<ExpertId> order(num_experts);
  for (std::size_t t = 0; t < hidden.rows(); ++t) {
    auto row = logits.row(t);
    const double max_logit = *std::max_element(row.begin(), row.end());
    double denom = 0.0;
    for (std::size_t e = 0; e < num_experts; ++e) {
      probs[e] = std::exp(static_cast<double>(row[e]) - max_logit);
      denom += probs[e];
    }
    for (auto& p : probs) p /= denom;

    std::iota(order.begin(), order.end(), ExpertId{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](ExpertId a, ExpertId b) { return probs[a] > probs[b]; });
    double selected = 0.0;
    for (std::size_t i = 0; i < k; ++i) selected += probs[order[i]];
    auto& choices = per_token[t];
    choices.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
      choices.push_back({order[i], static_cast<float>(probs[order[i]] / selected)});
    }
  }
  return {num_experts, std::move(per_token)};
}

Tensor2D ffn_forward(const Tensor2D& x, const ExpertWeights& w, kernels::Exec exec) {
  if (w.w_up.cols() != w.w_down.rows() || w.w_down.cols() != w.w_up.rows()) {
    throw ConfigError("ffn_forward: expert weight shapes are inconsistent");
  }
  if (x.cols() != w.w_up.rows()) {
    throw ConfigError("ffn_forward: input has " + std::to_string(x.cols()) + " columns, expert expects " +
                      std::to_string(w.w_up.rows()));
  }
  if (x.rows() == 0) return Tensor2D(0, w.w_down.cols());
  Tensor2D hidden = kernels::matmul(x, w.w_up, exec);
  kernels::silu_inplace(hidden, exec);
  return kernels::matmul(hidden, w.w_down, exec);
}

Tensor2D reference_moe_forward(const Tensor2D& hidden, const RoutingTable& routing,
                               std::span<const ExpertWeights> experts) {
  if (routing.num_tokens() != hidden.rows()) {
    throw ConfigError("reference_moe_forward: routing covers " + std::to_string(routing.num_tokens()) +
                      " tokens, hidden has " + std::to_string(hidden.rows()));
  }
  if (routing.num_experts() > experts.size()) {
    throw ConfigError("reference_moe_forward: routing references " + std::to_string(routing.num_experts()) +
                      " experts but only " + std::to_string(experts.size()) + " weights were supplied");
  }
  const std::size_t width = hidden.cols();
  Tensor2D out(hidden.rows(), width);
  for (ExpertId e = 0; e < routing.num_experts(); ++e) {
    auto routed = routing.expert_tokens(e);
    if (routed.empty()) continue;
    Tensor2D batch(routed.size(), width);
    for (std::size_t i = 0; i < routed.size(); ++i) {
      auto src = hidden.row(routed[i].token);
      std::copy(src.begin(), src.end(), batch.row(i).begin());
    }
    const Tensor2D y = ffn_forward(batch, experts[e], kernels::Exec::serial);
    for (std::size_t i = 0; i < routed.size(); ++i) {
      auto dst = out.row(routed[i].token);
      auto src = y.row(i);
      for (std::size_t j = 0; j < width; ++j) dst[j] += routed[i].weight * src[j];
    }
  }
  return out;
}

std::vector<double> l2_saliency(const Tensor2D& activations) {
  std::vector<double> scores(activations.rows());
  for (std::size_t t = 0; t < activations.rows(); ++t) {
    double acc = 0.0;
    for (float v : activations.row(t)) acc += static_cast<double>(v) * v;
    scores[t] = std::sqrt(acc);
  }
  return scores;
}

Tensor2D random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng, float scale) {
  std::uniform_real_distribution<float> dist(-scale, scale);
  Tensor2D out(rows, cols);
  for (auto& v : out.data()) v = dist(rng);
  return out;
}

std::vector<ExpertWeights> random_experts(const MoELayerConfig& config, std::mt19937_64& rng) {
  config.validate();
  const float up_scale = 1.0f / std::sqrt(static_cast<float>(config.hidden_dim));
  const float down_scale = 1.0f / std::sqrt(static_cast<float>(config.ffn_dim));
  std::vector<ExpertWeights> experts;
  experts.reserve(config.num_experts);
  for (std::size_t e = 0; e < config.num_experts; ++e) {
    experts.push_back({random_tensor(config.hidden_dim, config.ffn_dim, rng, up_scale),
                       random_tensor(config.ffn_dim, config.hidden_dim, rng, down_scale)});
  }
  return experts;
}

}  // namespace tiermoe
