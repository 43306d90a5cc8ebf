// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "tiermoe/calibration.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>

#include "json.hpp"

#include "tiermoe/error.hpp"

namespace tiermoe {

std::uint64_t CalibrationProfile::layer_total(std::size_t layer) const {
  const auto& c = counts.at(layer);
  return std::accumulate(c.begin(), c.end(), std::uint64_t{0});
}

std::vector<ExpertId> CalibrationProfile::rank(std::size_t layer) const {
  return top_k_by_count(counts.at(layer), num_experts);
}

double CalibrationProfile::imbalance_ratio(std::size_t layer) const {
  const auto& c = counts.at(layer);
  const std::uint64_t total = layer_total(layer);
  if (total == 0 || c.empty()) return 1.0;
  const std::uint64_t peak = *std::max_element(c.begin(), c.end());
  return static_cast<double>(peak) * static_cast<double>(c.size()) / static_cast<double>(total);
}

void CalibrationProfile::validate() const {
  if (counts.size() != num_layers) {
    throw ValidationError("profile declares L=" + std::to_string(num_layers) + " but holds " +
                          std::to_string(counts.size()) + " count rows");
  }
  if (num_layers > 0 && (top_k == 0 || top_k > num_experts)) {
    throw ValidationError("profile has k=" + std::to_string(top_k) + " outside [1, E]");
  }
  for (std::size_t l = 0; l < counts.size(); ++l) {
    if (counts[l].size() != num_experts) {
      throw ValidationError("profile layer " + std::to_string(l) + " holds " + std::to_string(counts[l].size()) +
                            " counts, expected E=" + std::to_string(num_experts));
    }
    if (layer_total(l) != total_tokens * top_k) {
      throw ValidationError("profile layer " + std::to_string(l) + " counts sum to " +
                            std::to_string(layer_total(l)) + ", expected total_tokens*k=" +
                            std::to_string(total_tokens * top_k));
    }
  }
}

CalibrationProfile profile_traces(std::span<const RoutingTrace> traces) {
  if (traces.empty()) throw ConfigError("profile_traces: no traces supplied");
  const auto& first = traces.front();
  CalibrationProfile profile;
  profile.num_experts = first.num_experts;
  profile.num_layers = first.num_layers;
  profile.top_k = first.top_k;
  for (const auto& trace : traces) {
    if (trace.num_experts != first.num_experts || trace.num_layers != first.num_layers ||
        trace.top_k != first.top_k) {
      throw ConfigError("profile_traces: traces disagree on (L, E, k)");
    }
    trace.validate();
    profile.total_tokens += trace.num_tokens();
  }
  profile.counts.assign(profile.num_layers, std::vector<std::uint64_t>(profile.num_experts, 0));
  const auto num_layers = static_cast<std::int64_t>(profile.num_layers);
#pragma omp parallel for schedule(static)
  for (std::int64_t l = 0; l < num_layers; ++l) {
    auto& row = profile.counts[static_cast<std::size_t>(l)];
    for (const auto& trace : traces) {
      for (const auto& token : trace.layers[static_cast<std::size_t>(l)]) {
        for (ExpertId e : token.experts) ++row[e];
      }
    }
  }
  return profile;
}

std::vector<ExpertId> top_k_by_count(std::span<const std::uint64_t> counts, std::size_t K) {
  if (K > counts.size()) throw ConfigError("top_k_by_count: K exceeds the number of experts");
  std::vector<ExpertId> order(counts.size());
  std::iota(order.begin(), order.end(), ExpertId{0});
  std::stable_sort(order.begin(), order.end(), [&](ExpertId a, ExpertId b) { return counts[a] > counts[b]; });
  order.resize(K);
  return order;
}

double overlap_at_k(std::span<const ExpertId> predicted, std::span<const ExpertId> observed, std::size_t K) {
  if (K == 0) throw ConfigError("overlap_at_k: K must be >= 1");
  if (predicted.size() != K || observed.size() != K) {
    throw ConfigError("overlap_at_k: both sets must contain exactly K=" + std::to_string(K) + " experts");
  }
  std::vector<ExpertId> a(predicted.begin(), predicted.end());
  std::vector<ExpertId> b(observed.begin(), observed.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<ExpertId> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  return static_cast<double>(common.size()) / static_cast<double>(K);
}

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

ProfileValidation validate_profile(const CalibrationProfile& profile, const RoutingTrace& heldout, std::size_t K) {
  if (K == 0 || K > profile.num_experts) {
    throw ConfigError("validate_profile: K=" + std::to_string(K) + " must be in [1, E=" +
                      std::to_string(profile.num_experts) + "]");
  }
  if (heldout.num_experts != profile.num_experts || heldout.num_layers != profile.num_layers) {
    throw ConfigError("validate_profile: held-out trace shape does not match the profile");
  }
  const CalibrationProfile observed = profile_traces(std::span<const RoutingTrace>(&heldout, 1));
  ProfileValidation result;
  result.K = K;
  for (std::size_t l = 0; l < profile.num_layers; ++l) {
    const auto predicted = top_k_by_count(profile.counts[l], K);
    const auto seen = top_k_by_count(observed.counts[l], K);
    result.per_layer.push_back(overlap_at_k(predicted, seen, K));
  }
  if (!result.per_layer.empty()) {
    result.mean = std::accumulate(result.per_layer.begin(), result.per_layer.end(), 0.0) /
                  static_cast<double>(result.per_layer.size());
  }
  result.median = median_of(result.per_layer);
  return result;
}

void save_profile(const CalibrationProfile& profile, const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["version"] = kProfileVersion;
  doc["E"] = profile.num_experts;
  doc["L"] = profile.num_layers;
  doc["k"] = profile.top_k;
  doc["counts"] = profile.counts;
  doc["total_tokens"] = profile.total_tokens;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open profile for writing: " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed writing profile: " + path.string());
}

CalibrationProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open profile: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("malformed profile " + path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("version")) {
    throw VersionError("profile " + path.string() + " carries no version tag");
  }
  if (!doc["version"].is_number_integer() || doc["version"].get<int>() != kProfileVersion) {
    throw VersionError("profile " + path.string() + " has version " + doc["version"].dump() + ", expected " +
                       std::to_string(kProfileVersion));
  }
  CalibrationProfile profile;
  try {
    auto read_count = [&](const char* key) {
      const auto v = doc.at(key).get<std::int64_t>();
      if (v < 0) throw ValidationError(std::string("profile field ") + key + " is negative");
      return static_cast<std::uint64_t>(v);
    };
    profile.num_experts = read_count("E");
    profile.num_layers = read_count("L");
    profile.top_k = read_count("k");
    profile.total_tokens = read_count("total_tokens");
    for (const auto& layer : doc.at("counts")) {
      std::vector<std::uint64_t> row;
      for (const auto& c : layer) {
        const auto v = c.get<std::int64_t>();
        if (v < 0) throw ValidationError("profile " + path.string() + " contains a negative count");
        row.push_back(static_cast<std::uint64_t>(v));
      }
      profile.counts.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("profile " + path.string() + " is missing or mistypes a field: " + e.what());
  }
  profile.validate();
  return profile;
}

}  // namespace tiermoe
