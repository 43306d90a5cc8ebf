// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "json.hpp"
#include "tiermoe/calibration.hpp"
#include "tiermoe/error.hpp"
#include "tiermoe/workload.hpp"

namespace tiermoe {
namespace {

namespace fs = std::filesystem;

// A one-layer k=1 trace with the given per-expert token counts.
RoutingTrace trace_with_counts(const std::vector<std::size_t>& counts) {
  RoutingTrace t;
  t.num_experts = counts.size();
  t.num_layers = 1;
  t.top_k = 1;
  t.layers.resize(1);
  for (ExpertId e = 0; e < counts.size(); ++e) {
    for (std::size_t i = 0; i < counts[e]; ++i) t.layers[0].push_back({{e}, {1.0f}});
  }
  return t;
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("tiermoe_cal_" + name); }

TEST(Profile, WorkedCountsExample) {
  const auto t = trace_with_counts({64, 32, 32, 0});
  const auto p = profile_traces(std::span(&t, 1));
  EXPECT_DOUBLE_EQ(p.imbalance_ratio(0), 2.0);
  EXPECT_EQ(p.rank(0), (std::vector<ExpertId>{0, 1, 2, 3}));
}

TEST(Profile, UniformCountsAreBalanced) {
  const auto t = trace_with_counts({10, 10, 10, 10, 10});
  EXPECT_DOUBLE_EQ(profile_traces(std::span(&t, 1)).imbalance_ratio(0), 1.0);
}

TEST(Profile, EmptyLayerHasUnitRatio) {
  const auto t = trace_with_counts({0, 0, 0});
  EXPECT_DOUBLE_EQ(profile_traces(std::span(&t, 1)).imbalance_ratio(0), 1.0);
}

TEST(Profile, CountsAreAdditiveAndOrderInvariant) {
  const auto a = generate_workload({1, 100, 3, 8, 2, 1.0, 0.25});
  const auto b = generate_workload({2, 60, 3, 8, 2, 1.0, 0.25});
  const std::vector<RoutingTrace> ab{a, b};
  const std::vector<RoutingTrace> ba{b, a};
  const auto pab = profile_traces(ab);
  const auto pa = profile_traces(std::span(&a, 1));
  const auto pb = profile_traces(std::span(&b, 1));
  EXPECT_EQ(pab.counts, profile_traces(ba).counts);
  EXPECT_EQ(pab.total_tokens, 160u);
  for (std::size_t l = 0; l < 3; ++l) {
    for (std::size_t e = 0; e < 8; ++e) EXPECT_EQ(pab.counts[l][e], pa.counts[l][e] + pb.counts[l][e]);
  }
}

TEST(Profile, InconsistentShapesRejected) {
  const auto a = generate_workload({1, 10, 3, 8, 2, 1.0, 0.25});
  const auto b = generate_workload({1, 10, 3, 6, 2, 1.0, 0.25});
  const std::vector<RoutingTrace> both{a, b};
  EXPECT_THROW(profile_traces(both), ConfigError);
}

TEST(Profile, RankIsScaleInvariantAndSorted) {
  CalibrationProfile p;
  p.num_experts = 5;
  p.num_layers = 1;
  p.top_k = 1;
  p.counts = {{3, 9, 1, 9, 4}};
  p.total_tokens = 26;
  const auto r = p.rank(0);
  EXPECT_EQ(r, (std::vector<ExpertId>{1, 3, 4, 0, 2}));
  for (auto& c : p.counts[0]) c *= 7;
  EXPECT_EQ(p.rank(0), r);
  EXPECT_GE(p.imbalance_ratio(0), 1.0);
}

TEST(Overlap, Examples) {
  const std::vector<ExpertId> a{1, 2, 3, 4};
  const std::vector<ExpertId> b{1, 2, 5, 6};
  const std::vector<ExpertId> c{7, 8, 9, 10};
  EXPECT_DOUBLE_EQ(overlap_at_k(a, a, 4), 1.0);
  EXPECT_DOUBLE_EQ(overlap_at_k(a, b, 4), 0.5);
  EXPECT_DOUBLE_EQ(overlap_at_k(b, a, 4), 0.5);
  EXPECT_DOUBLE_EQ(overlap_at_k(a, c, 4), 0.0);
  EXPECT_THROW(overlap_at_k(a, std::vector<ExpertId>{1, 2}, 4), ConfigError);
}

TEST(ValidateProfile, SelfOverlapIsOne) {
  const auto t = generate_workload({3, 512, 4, 16, 2, 0.6, 0.25});
  const auto p = profile_traces(std::span(&t, 1));
  const auto v = validate_profile(p, t, 8);
  for (double x : v.per_layer) EXPECT_EQ(x, 1.0);
  EXPECT_EQ(v.median, 1.0);
  EXPECT_THROW(validate_profile(p, t, 17), ConfigError);
}

TEST(ValidateProfile, UniformRoutingOverlapNearKOverE) {
  // Expected |A ∩ B| / K for two independent uniformly ranked top-K sets.
  const std::size_t E = 64;
  const std::size_t K = 4;
  double mean = 0.0;
  const int trials = 40;
  for (int s = 0; s < trials; ++s) {
    const auto profiled = generate_workload({100u + s, 2000, 1, E, 2, 0.0, 0.0});
    const auto heldout = generate_workload({900u + s, 2000, 1, E, 2, 0.0, 0.0});
    mean += validate_profile(profile_traces(std::span(&profiled, 1)), heldout, K).mean;
  }
  mean /= trials;
  EXPECT_NEAR(mean, static_cast<double>(K) / E, 0.05);
}

TEST(ProfileFile, RoundTrip) {
  const auto t = generate_workload({4, 300, 2, 8, 2, 0.8, 0.25});
  const auto p = profile_traces(std::span(&t, 1));
  const auto path = temp_file("roundtrip.json");
  save_profile(p, path);
  const auto q = load_profile(path);
  EXPECT_EQ(q.counts, p.counts);
  EXPECT_EQ(q.total_tokens, p.total_tokens);
  EXPECT_EQ(q.top_k, p.top_k);
  fs::remove(path);
}

TEST(ProfileFile, DistinctErrors) {
  EXPECT_THROW(load_profile(temp_file("does_not_exist.json")), IoError);

  const auto t = generate_workload({5, 50, 1, 4, 1, 0.8, 0.25});
  const auto path = temp_file("edit.json");
  save_profile(profile_traces(std::span(&t, 1)), path);
  auto doc = nlohmann::json::parse(std::ifstream(path));

  auto bad_version = doc;
  bad_version["version"] = 99;
  std::ofstream(path) << bad_version.dump();
  EXPECT_THROW(load_profile(path), VersionError);

  auto negative = doc;
  negative["counts"][0][0] = -3;
  std::ofstream(path) << negative.dump();
  EXPECT_THROW(load_profile(path), ValidationError);

  std::ofstream(path) << "{not json";
  EXPECT_THROW(load_profile(path), IoError);
  fs::remove(path);
}

}  // namespace
}  // namespace tiermoe
