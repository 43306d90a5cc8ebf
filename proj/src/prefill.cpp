// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "tiermoe/prefill.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <string>

#include "tiermoe/error.hpp"
#include "tiermoe/grouped_exec.hpp"

namespace tiermoe {
namespace {

// Keeps the model weights independent of the routing stream for one seed.
constexpr std::uint64_t kModelSeedSalt = 0x9E3779B97F4A7C15ULL;

// Same capacity for every expert of a layer; capacities may differ by layer.
CapacityPlan per_layer_uniform(std::span<const std::uint32_t> caps, std::size_t num_experts,
                               std::size_t chunk_tokens, OverflowPolicy policy) {
  std::set<std::uint32_t, std::greater<>> distinct(caps.begin(), caps.end());
  CapacityPlan plan;
  plan.tiers = TierSet(std::vector<std::uint32_t>(distinct.begin(), distinct.end()));
  plan.chunk_tokens = chunk_tokens;
  plan.policy = policy;
  for (auto c : caps) {
    plan.capacity.emplace_back(num_experts, c);
    plan.overflow_flagged.emplace_back(num_experts, false);
  }
  return plan;
}

std::vector<std::vector<double>> expected_loads(const CalibrationProfile& profile, std::size_t chunk_tokens) {
  std::vector<std::vector<double>> loads(profile.num_layers, std::vector<double>(profile.num_experts, 0.0));
  if (profile.total_tokens == 0) return loads;
  for (std::size_t l = 0; l < profile.num_layers; ++l) {
    for (std::size_t e = 0; e < profile.num_experts; ++e) {
      loads[l][e] = static_cast<double>(chunk_tokens) * static_cast<double>(profile.counts[l][e]) /
                    static_cast<double>(profile.total_tokens);
    }
  }
  return loads;
}

std::vector<ExpertId> identity_order(std::size_t n) {
  std::vector<ExpertId> ids(n);
  for (std::size_t e = 0; e < n; ++e) ids[e] = static_cast<ExpertId>(e);
  return ids;
}

LayerWork dynamic_work(const RoutingTable& routing) {
  LayerWork work;
  work.tokens = routing.num_tokens();
  for (ExpertId e = 0; e < routing.num_experts(); ++e) {
    const std::size_t n = routing.load(e);
    work.groups.push_back({DeviceKind::cpu, 1, n > 0 ? std::size_t{1} : std::size_t{0}, n, n});
    work.routed_slots += n;
  }
  return work;
}

LayerWork grouped_work(const GroupedStats& stats, const LayerPlacement& placement, const RoutingTable& routing) {
  LayerWork work;
  work.tokens = routing.num_tokens();
  work.padded_rows = stats.padded_rows;
  work.dropped_tokens = stats.dropped_tokens;
  work.routed_slots = routing.num_tokens() * routing.top_k();
  for (const auto& g : stats.groups) {
    const auto& placed = placement.groups.at(g.group_index);
    work.groups.push_back({placed.device, placed.group.size(), g.rounds, g.rows_per_round, g.valid_rows});
  }
  return work;
}

// Error over tokens none of whose experts dropped them.
double undropped_error(const Tensor2D& actual, const Tensor2D& expected, const GroupedStats& stats) {
  std::vector<bool> skip(actual.rows(), false);
  for (const auto& [token, expert] : stats.drops) skip[token] = true;
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t t = 0; t < actual.rows(); ++t) {
    if (skip[t]) continue;
    auto a = actual.row(t);
    auto b = expected.row(t);
    for (std::size_t j = 0; j < a.size(); ++j) {
      diff = std::max(diff, std::abs(static_cast<double>(a[j]) - b[j]));
      scale = std::max(scale, std::abs(static_cast<double>(b[j])));
    }
  }
  return scale > 0.0 ? diff / scale : diff;
}

void fold_chunk(RunMetrics& total, const RunMetrics& layer) {
  const std::size_t tokens = total.tokens;
  total += layer;
  total.tokens = tokens;
  total.ept = tokens > 0 ? (total.energy_compute + total.energy_comm) / static_cast<double>(tokens) : 0.0;
}

}  // namespace

SyntheticModel make_model(const RunConfig& config, std::size_t tokens) {
  std::mt19937_64 rng(config.seed ^ kModelSeedSalt);
  SyntheticModel model;
  model.embeddings = random_tensor(tokens, config.hidden_dim, rng, 1.0f);
  for (std::size_t l = 0; l < config.num_layers; ++l) model.experts.push_back(random_experts(config.layer_config(), rng));
  return model;
}

std::vector<std::size_t> worst_case_loads(const RoutingTrace& trace, std::size_t chunk_size) {
  if (chunk_size == 0) throw ConfigError("worst_case_loads: chunk size must be >= 1");
  std::vector<std::size_t> worst(trace.num_layers, 0);
  std::vector<std::size_t> loads(trace.num_experts);
  for (std::size_t l = 0; l < trace.num_layers; ++l) {
    for (std::size_t begin = 0; begin < trace.num_tokens(); begin += chunk_size) {
      std::fill(loads.begin(), loads.end(), 0);
      const std::size_t end = std::min(trace.num_tokens(), begin + chunk_size);
      for (std::size_t t = begin; t < end; ++t) {
        for (ExpertId e : trace.layers[l][t].experts) ++loads[e];
      }
      worst[l] = std::max(worst[l], *std::max_element(loads.begin(), loads.end()));
    }
  }
  return worst;
}

StaticPlan build_static_plan(const RunConfig& config, const CalibrationProfile& profile, const RoutingTrace* prompt) {
  config.validate();
  if (profile.num_experts != config.num_experts || profile.num_layers != config.num_layers) {
    throw ConfigError("calibration profile shape (E=" + std::to_string(profile.num_experts) + ", L=" +
                      std::to_string(profile.num_layers) + ") does not match the run configuration");
  }
  const std::size_t L = config.num_layers;
  const std::size_t E = config.num_experts;
  const std::size_t B = config.chunk_size;
  StaticPlan plan;
  plan.mode = config.mode;
  if (config.mode == Mode::cpu_only) return plan;

  CapacityPlan capacity;
  if (config.capacity_override > 0) {
    const OverflowPolicy policy = config.mode == Mode::naive_offload ? OverflowPolicy::pad_only : config.overflow;
    capacity = uniform_plan(L, E, config.capacity_override, B, policy);
  } else if (config.mode == Mode::naive_offload) {
    if (prompt == nullptr) throw ConfigError("naive-offload planning needs the prompt trace for worst-case capacity");
    std::vector<std::uint32_t> caps;
    for (std::size_t w : worst_case_loads(*prompt, B)) caps.push_back(align_capacity(static_cast<double>(w)));
    capacity = per_layer_uniform(caps, E, B, OverflowPolicy::pad_only);
  } else if (config.mode == Mode::ours_base) {
    std::vector<std::uint32_t> caps;
    for (std::size_t l = 0; l < L; ++l) {
      caps.push_back(estimate_max_load(B * config.top_k, E, profile.imbalance_ratio(l)));
    }
    capacity = per_layer_uniform(caps, E, B, config.overflow);
  } else {
    const TierSet tiers = derive_tier_set(base_capacity(B, config.top_k, E), config.tier_multipliers);
    capacity = assign_tiers(profile, tiers, B, config.overflow);
  }
  capacity.expected_load = expected_loads(profile, B);

  const DevicePair devices = config.devices();
  for (std::size_t l = 0; l < L; ++l) {
    std::vector<ExpertGroup> groups;
    switch (config.mode) {
      case Mode::ours_tg: groups = chunk_groups(profile.rank(l), config.group_size, capacity, l); break;
      case Mode::ours_all: {
        const auto split = classify_hot_cold(profile, l, config.hot_fraction);
        groups = form_groups(split.hot, split.cold, config.group_size, capacity, l);
        break;
      }
      default: groups = chunk_groups(identity_order(E), 1, capacity, l); break;
    }
    if (config.mode == Mode::ours_all) {
      plan.placement.layers.push_back(place_groups(groups, capacity.expected_load[l], devices, config.hidden_dim,
                                                   config.ffn_dim, capacity.policy));
    } else {
      plan.placement.layers.push_back(place_all_on(DeviceKind::npu, groups, devices, config.hidden_dim,
                                                   config.ffn_dim, config.allow_cpu_fallback));
    }
  }
  plan.capacity = std::move(capacity);
  return plan;
}

RunReport run_prefill(const RunConfig& config, const PrefillInputs& inputs) {
  config.validate();
  const std::size_t P = config.prompt_length;
  const std::size_t B = config.chunk_size;

  RoutingTrace prompt;
  CalibrationProfile profile;
  if (inputs.prompt != nullptr) {
    const auto& t = *inputs.prompt;
    if (t.num_experts != config.num_experts || t.num_layers != config.num_layers || t.top_k != config.top_k) {
      throw ConfigError("trace shape (E=" + std::to_string(t.num_experts) + ", L=" + std::to_string(t.num_layers) +
                        ", k=" + std::to_string(t.top_k) + ") does not match the run configuration");
    }
    if (t.num_tokens() < P) {
      throw ConfigError("trace holds " + std::to_string(t.num_tokens()) + " tokens, prompt length is " +
                        std::to_string(P));
    }
    prompt = t.slice_tokens(0, P);
    if (inputs.profile == nullptr) profile = profile_traces(std::span<const RoutingTrace>(&prompt, 1));
  } else {
    const std::size_t calib = config.calibration_tokens > 0 ? config.calibration_tokens : P;
    const RoutingTrace full = generate_workload(config.workload(calib + P));
    prompt = full.slice_tokens(calib, calib + P);
    if (inputs.profile == nullptr) {
      const RoutingTrace calibration = full.slice_tokens(0, calib);
      profile = profile_traces(std::span<const RoutingTrace>(&calibration, 1));
    }
  }
  if (inputs.profile != nullptr) profile = *inputs.profile;

  RunReport report;
  report.config = config;
  report.plan = build_static_plan(config, profile, &prompt);
  report.calibration = validate_profile(profile, prompt, config.overlap_k);
  for (std::size_t l = 0; l < config.num_layers; ++l) report.imbalance_ratios.push_back(profile.imbalance_ratio(l));

  const SyntheticModel model = make_model(config, P);
  const DevicePair devices = config.devices();
  SimParams params;
  params.num_experts = config.num_experts;
  params.hidden_dim = config.hidden_dim;
  params.ffn_dim = config.ffn_dim;
  params.attention_cost = config.attention_cost;
  params.attention_device = config.mode == Mode::cpu_only ? DeviceKind::cpu : DeviceKind::npu;
  params.orchestration_cost = config.orchestration_cost;

  report.final_hidden = model.embeddings;
  report.num_chunks = (P + B - 1) / B;
  double clock = 0.0;
  for (std::size_t c = 0; c < report.num_chunks; ++c) {
    const std::size_t begin = c * B;
    const std::size_t end = std::min(P, begin + B);
    Tensor2D hidden = model.embeddings.slice_rows(begin, end);
    RunMetrics chunk_total;
    chunk_total.tokens = end - begin;
    for (std::size_t l = 0; l < config.num_layers; ++l) {
      const RoutingTable routing = prompt.layer_table(l, begin, end);
      const auto& experts = model.experts[l];
      LayerRow row{c, l, {}, 0.0};
      Tensor2D out;
      LayerWork work;
      if (config.mode == Mode::cpu_only) {
        out = reference_moe_forward(hidden, routing, experts);
        work = dynamic_work(routing);
      } else {
        const auto saliency = l2_saliency(hidden);
        const auto& placement = report.plan.placement.layers[l];
        const auto groups = placement.expert_groups();
        GroupedResult result =
            grouped_moe_forward(hidden, routing, *report.plan.capacity, l, groups, experts, saliency);
        if (config.verify) {
          row.max_rel_err = undropped_error(result.out, reference_moe_forward(hidden, routing, experts), result.stats);
          TIERMOE_CHECK(row.max_rel_err <= 1e-4, "grouped output diverged from the oracle (chunk " +
                                                     std::to_string(c) + ", layer " + std::to_string(l) + ")");
        }
        work = grouped_work(result.stats, placement, routing);
        out = std::move(result.out);
      }
      const LayerSimulation sim = simulate_layer(work, devices, params, clock);
      clock = sim.end_time;
      row.metrics = sim.metrics;
      fold_chunk(chunk_total, row.metrics);
      report.max_rel_err = std::max(report.max_rel_err, row.max_rel_err);
      report.rows.push_back(row);

      auto h = hidden.data();
      auto o = out.data();
      for (std::size_t i = 0; i < h.size(); ++i) h[i] += o[i];
      TIERMOE_CHECK(hidden.all_finite(), "non-finite activations after layer " + std::to_string(l));
    }
    std::copy(hidden.data().begin(), hidden.data().end(), report.final_hidden.row(begin).begin());
    report.aggregate += chunk_total;
    report.chunk_totals.push_back(chunk_total);
  }
  return report;
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::capacity: return "capacity";
    case SweepAxis::group_size: return "group_size";
    case SweepAxis::chunk_size: return "chunk_size";
  }
  return "?";
}

SweepAxis parse_sweep_axis(std::string_view text) {
  if (text == "capacity") return SweepAxis::capacity;
  if (text == "group_size" || text == "group-size") return SweepAxis::group_size;
  if (text == "chunk_size" || text == "chunk-size") return SweepAxis::chunk_size;
  throw ConfigError("unknown sweep axis '" + std::string(text) + "' (expected capacity, group_size or chunk_size)");
}

SweepResult sweep(const RunConfig& base, SweepAxis axis, std::span<const std::uint64_t> values,
                  const PrefillInputs& inputs) {
  if (values.empty()) throw ConfigError("sweep: no values given");
  SweepResult result;
  result.axis = axis;
  for (std::uint64_t v : values) {
    RunConfig cfg = base;
    switch (axis) {
      case SweepAxis::capacity: cfg.capacity_override = static_cast<std::uint32_t>(v); break;
      case SweepAxis::group_size: cfg.group_size = v; break;
      case SweepAxis::chunk_size: cfg.chunk_size = v; break;
    }
    SweepPoint point;
    point.value = v;
    try {
      point.report = run_prefill(cfg, inputs);
    } catch (const std::exception& e) {
      point.error = e.what();
    }
    result.points.push_back(std::move(point));
  }
  return result;
}

}  // namespace tiermoe
