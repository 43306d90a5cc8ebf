// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "tiermoe/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>

#include "json.hpp"
#include "tiermoe/error.hpp"

namespace tiermoe {

RoutingTrace generate_workload(const WorkloadParams& p) {
  if (!(p.zipf_s >= 0.0)) throw ConfigError("generate_workload: zipf_s must be >= 0");
  if (!(p.layer_jitter >= 0.0)) throw ConfigError("generate_workload: layer_jitter must be >= 0");
  if (p.num_experts == 0 || p.top_k == 0 || p.top_k > p.num_experts) {
    throw ConfigError("generate_workload: need 1 <= k <= E");
  }
  std::mt19937_64 rng(p.seed);
  std::vector<ExpertId> base(p.num_experts);
  std::iota(base.begin(), base.end(), ExpertId{0});
  std::shuffle(base.begin(), base.end(), rng);

  std::vector<double> zipf(p.num_experts);
  for (std::size_t i = 0; i < zipf.size(); ++i) zipf[i] = 1.0 / std::pow(static_cast<double>(i + 1), p.zipf_s);

  const auto swaps = static_cast<std::size_t>(std::llround(p.layer_jitter * static_cast<double>(p.num_experts)));
  std::uniform_int_distribution<std::size_t> pick(0, p.num_experts - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<float> gate(0.2f, 1.0f);

  RoutingTrace trace{p.num_experts, p.num_layers, p.top_k, {}};
  trace.layers.resize(p.num_layers);
  std::vector<double> popularity(p.num_experts);
  std::vector<double> remaining(p.num_experts);
  for (std::size_t l = 0; l < p.num_layers; ++l) {
    auto perm = base;
    for (std::size_t s = 0; s < swaps; ++s) std::swap(perm[pick(rng)], perm[pick(rng)]);
    for (std::size_t i = 0; i < perm.size(); ++i) popularity[perm[i]] = zipf[i];

    auto& layer = trace.layers[l];
    layer.reserve(p.tokens);
    for (std::size_t t = 0; t < p.tokens; ++t) {
      remaining = popularity;
      TokenRoute route;
      double mass = std::accumulate(remaining.begin(), remaining.end(), 0.0);
      for (std::size_t j = 0; j < p.top_k; ++j) {
        double target = unit(rng) * mass;
        std::size_t chosen = p.num_experts;
        for (std::size_t e = 0; e < remaining.size(); ++e) {
          if (remaining[e] <= 0.0) continue;
          chosen = e;
          if (target < remaining[e]) break;
          target -= remaining[e];
        }
        route.experts.push_back(static_cast<ExpertId>(chosen));
        mass -= remaining[chosen];
        remaining[chosen] = 0.0;
      }
      float sum = 0.0f;
      for (std::size_t j = 0; j < p.top_k; ++j) {
        route.weights.push_back(gate(rng));
        sum += route.weights.back();
      }
      std::sort(route.weights.begin(), route.weights.end(), std::greater<>());
      for (auto& w : route.weights) w /= sum;
      layer.push_back(std::move(route));
    }
  }
  return trace;
}

void export_trace(const RoutingTrace& trace, const std::filesystem::path& path) {
  trace.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot open trace for writing: " + path.string());
  nlohmann::ordered_json header;
  header["version"] = kTraceVersion;
  header["E"] = trace.num_experts;
  header["L"] = trace.num_layers;
  header["k"] = trace.top_k;
  out << header.dump() << '\n';
  for (std::size_t l = 0; l < trace.layers.size(); ++l) {
    for (std::size_t t = 0; t < trace.layers[l].size(); ++t) {
      nlohmann::ordered_json rec;
      rec["layer"] = l;
      rec["token"] = t;
      rec["experts"] = trace.layers[l][t].experts;
      rec["weights"] = trace.layers[l][t].weights;
      out << rec.dump() << '\n';
    }
  }
  if (!out) throw IoError("failed writing trace: " + path.string());
}

RoutingTrace ingest_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace: " + path.string());

  RoutingTrace trace;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  // (layer, token) -> record, collected sparsely then checked for density.
  std::vector<std::vector<std::optional<TokenRoute>>> records;
  auto fail = [&](const std::string& what) -> ValidationError {
    return ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw fail(std::string("parse error: ") + e.what());
    }
    try {
      if (!have_header) {
        if (!doc.contains("version")) throw fail("missing header line with a version tag");
        if (doc.at("version").get<int>() != kTraceVersion) {
          throw VersionError(path.string() + ":" + std::to_string(line_no) + ": trace version " +
                             doc.at("version").dump() + ", expected " + std::to_string(kTraceVersion));
        }
        trace.num_experts = doc.at("E").get<std::size_t>();
        trace.num_layers = doc.at("L").get<std::size_t>();
        trace.top_k = doc.at("k").get<std::size_t>();
        if (trace.top_k == 0 || trace.top_k > trace.num_experts) throw fail("header needs 1 <= k <= E");
        records.resize(trace.num_layers);
        have_header = true;
        continue;
      }
      const auto layer = doc.at("layer").get<std::int64_t>();
      const auto token = doc.at("token").get<std::int64_t>();
      if (layer < 0 || static_cast<std::size_t>(layer) >= trace.num_layers) throw fail("layer out of range");
      if (token < 0) throw fail("negative token index");
      TokenRoute route;
      for (const auto& e : doc.at("experts")) {
        const auto id = e.get<std::int64_t>();
        if (id < 0 || static_cast<std::size_t>(id) >= trace.num_experts) {
          throw fail("expert id " + std::to_string(id) + " >= E=" + std::to_string(trace.num_experts));
        }
        route.experts.push_back(static_cast<ExpertId>(id));
      }
      route.weights = doc.at("weights").get<std::vector<float>>();
      if (route.experts.size() != trace.top_k) {
        throw fail("record has " + std::to_string(route.experts.size()) + " experts, expected k=" +
                   std::to_string(trace.top_k));
      }
      if (route.weights.size() != trace.top_k) throw fail("record weight count differs from k");
      double sum = 0.0;
      for (std::size_t i = 0; i < route.experts.size(); ++i) {
        if (!(route.weights[i] > 0.0f)) throw fail("gate weights must be positive");
        sum += route.weights[i];
        for (std::size_t j = 0; j < i; ++j) {
          if (route.experts[j] == route.experts[i]) throw fail("record repeats an expert");
        }
      }
      if (std::abs(sum - 1.0) > 1e-4) throw fail("gate weights sum to " + std::to_string(sum));
      auto& slots = records[static_cast<std::size_t>(layer)];
      const auto t = static_cast<std::size_t>(token);
      if (slots.size() <= t) slots.resize(t + 1);
      if (slots[t]) throw fail("duplicate record for this (layer, token)");
      slots[t] = std::move(route);
    } catch (const nlohmann::json::exception& e) {
      throw fail(std::string("malformed record: ") + e.what());
    }
  }
  if (!have_header) return trace;

  trace.layers.resize(trace.num_layers);
  const std::size_t tokens = records.empty() ? 0 : records.front().size();
  for (std::size_t l = 0; l < records.size(); ++l) {
    if (records[l].size() != tokens) {
      throw ValidationError(path.string() + ": layer " + std::to_string(l) + " covers " +
                            std::to_string(records[l].size()) + " tokens, layer 0 covers " + std::to_string(tokens));
    }
    for (std::size_t t = 0; t < tokens; ++t) {
      if (!records[l][t]) {
        throw ValidationError(path.string() + ": layer " + std::to_string(l) + " has no record for token " +
                              std::to_string(t));
      }
      trace.layers[l].push_back(std::move(*records[l][t]));
    }
  }
  return trace;
}

}  // namespace tiermoe
