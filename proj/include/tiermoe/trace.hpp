// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <vector>

#include "tiermoe/core_model.hpp"

namespace tiermoe {

// One token's routing decision at one layer.
struct TokenRoute {
  std::vector<ExpertId> experts;
  std::vector<float> weights;

  friend bool operator==(const TokenRoute&, const TokenRoute&) = default;
};

// Recorded (or synthesized) routing for a prompt: layers[l][t] is token t's
// route at layer l. Every layer covers the same tokens.
struct RoutingTrace {
  std::size_t num_experts = 0;
  std::size_t num_layers = 0;
  std::size_t top_k = 0;
  std::vector<std::vector<TokenRoute>> layers;

  std::size_t num_tokens() const { return layers.empty() ? 0 : layers.front().size(); }

  // Throws ConfigError if any record breaks the shape invariants.
  void validate() const;

  // Tokens [begin, end) of every layer.
  RoutingTrace slice_tokens(std::size_t begin, std::size_t end) const;

  // The routing of tokens [begin, end) at one layer, weights renormalized.
  RoutingTable layer_table(std::size_t layer, std::size_t begin, std::size_t end) const;

  friend bool operator==(const RoutingTrace&, const RoutingTrace&) = default;
};

}  // namespace tiermoe
