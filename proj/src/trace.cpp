// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "tiermoe/trace.hpp"

#include <algorithm>
#include <string>

#include "tiermoe/error.hpp"

namespace tiermoe {

void RoutingTrace::validate() const {
  if (layers.size() != num_layers) {
    throw ConfigError("RoutingTrace: expected " + std::to_string(num_layers) + " layers, found " +
                      std::to_string(layers.size()));
  }
  if (num_layers == 0) return;
  if (top_k == 0 || top_k > num_experts) throw ConfigError("RoutingTrace: k must satisfy 1 <= k <= E");
  const std::size_t tokens = layers.front().size();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].size() != tokens) {
      throw ConfigError("RoutingTrace: layer " + std::to_string(l) + " covers " +
                        std::to_string(layers[l].size()) + " tokens, layer 0 covers " + std::to_string(tokens));
    }
    for (std::size_t t = 0; t < tokens; ++t) {
      const auto& r = layers[l][t];
      const std::string where = "RoutingTrace: layer " + std::to_string(l) + " token " + std::to_string(t);
      if (r.experts.size() != top_k) throw ConfigError(where + " has " + std::to_string(r.experts.size()) + " experts, expected " + std::to_string(top_k));
      if (r.weights.size() != top_k) throw ConfigError(where + " has " + std::to_string(r.weights.size()) + " weights, expected " + std::to_string(top_k));
      for (std::size_t i = 0; i < top_k; ++i) {
        if (r.experts[i] >= num_experts) throw ConfigError(where + " references expert " + std::to_string(r.experts[i]) + " >= E");
        if (!(r.weights[i] > 0.0f)) throw ConfigError(where + " has a non-positive weight");
        for (std::size_t j = 0; j < i; ++j) {
          if (r.experts[j] == r.experts[i]) throw ConfigError(where + " repeats expert " + std::to_string(r.experts[i]));
        }
      }
    }
  }
}

RoutingTrace RoutingTrace::slice_tokens(std::size_t begin, std::size_t end) const {
  if (begin > end || end > num_tokens()) throw ConfigError("RoutingTrace::slice_tokens: bad range");
  RoutingTrace out{num_experts, num_layers, top_k, {}};
  out.layers.reserve(layers.size());
  for (const auto& layer : layers) {
    out.layers.emplace_back(layer.begin() + static_cast<std::ptrdiff_t>(begin),
                            layer.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

RoutingTable RoutingTrace::layer_table(std::size_t layer, std::size_t begin, std::size_t end) const {
  if (layer >= layers.size()) throw ConfigError("RoutingTrace::layer_table: layer out of range");
  if (begin > end || end > num_tokens()) throw ConfigError("RoutingTrace::layer_table: bad token range");
  std::vector<std::vector<GateChoice>> per_token;
  per_token.reserve(end - begin);
  for (std::size_t t = begin; t < end; ++t) {
    const auto& r = layers[layer][t];
    double sum = 0.0;
    for (float w : r.weights) sum += w;
    std::vector<GateChoice> choices;
    choices.reserve(r.experts.size());
    for (std::size_t i = 0; i < r.experts.size(); ++i) {
      choices.push_back({r.experts[i], static_cast<float>(r.weights[i] / sum)});
    }
    per_token.push_back(std::move(choices));
  }
  return {num_experts, std::move(per_token)};
}

}  // namespace tiermoe
