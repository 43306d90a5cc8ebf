// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//
// tiermoe_cli: generate or ingest routing traces, calibrate, plan, and run
// simulated chunked prefill under the baseline and ablation modes.

#include <fmt/core.h>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tiermoe/calibration.hpp"
#include "tiermoe/error.hpp"
#include "tiermoe/prefill.hpp"
#include "tiermoe/report.hpp"
#include "tiermoe/workload.hpp"

namespace fs = std::filesystem;
using namespace tiermoe;

namespace {

enum ExitCode : int { kOk = 0, kConfig = 1, kInvariant = 2, kIo = 3 };

struct Options {
  RunConfig config;
  std::string mode = "ours-all";
  std::string overflow = "prune";
};

void add_config_flags(CLI::App& app, Options& o) {
  auto& c = o.config;
  auto& a = c.anchors;
  app.add_option("--mode", o.mode, "cpu-only | naive-offload | ours-base | ours-T | ours-TG | ours-all")
      ->capture_default_str();
  app.add_option("--experts", c.num_experts, "experts per layer (E)")->capture_default_str();
  app.add_option("--top-k", c.top_k, "experts per token (k)")->capture_default_str();
  app.add_option("--hidden", c.hidden_dim, "hidden size (H)")->capture_default_str();
  app.add_option("--ffn", c.ffn_dim, "expert inner size (F)")->capture_default_str();
  app.add_option("--layers", c.num_layers, "MoE layers (L)")->capture_default_str();
  app.add_option("--prompt-length", c.prompt_length, "prompt tokens (P)")->capture_default_str();
  app.add_option("--chunk-size", c.chunk_size, "prefill chunk (B)")->capture_default_str();
  app.add_option("--tiers", c.tier_multipliers, "tier multipliers of the base capacity")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--group-size", c.group_size, "experts per grouped graph (G)")->capture_default_str();
  app.add_option("--hot-fraction", c.hot_fraction, "share of experts classed hot")->capture_default_str();
  app.add_option("--overflow", o.overflow, "prune | pad-only")->capture_default_str();
  app.add_option("--capacity", c.capacity_override, "uniform capacity for every static mode (0: planned)")
      ->capture_default_str();
  app.add_option("--cpu-fallback", c.allow_cpu_fallback, "allow oversized graphs to run on the host")
      ->capture_default_str();
  app.add_option("--cpu-time-per-mac", a.cpu_time_per_mac)->capture_default_str();
  app.add_option("--npu-speedup", a.npu_speedup, "cpu / npu time per mac")->capture_default_str();
  app.add_option("--sync-fraction", a.sync_fraction, "sync share of the reference dispatch workload")
      ->capture_default_str();
  app.add_option("--reference-dispatches", a.reference_dispatches)->capture_default_str();
  app.add_option("--reference-rows", a.reference_rows)->capture_default_str();
  app.add_option("--npu-launch", a.npu_launch_overhead)->capture_default_str();
  app.add_option("--cpu-launch", a.cpu_launch_overhead)->capture_default_str();
  app.add_option("--cpu-energy-per-mac", a.cpu_energy_per_mac)->capture_default_str();
  app.add_option("--npu-energy-per-mac", a.npu_energy_per_mac)->capture_default_str();
  app.add_option("--cpu-energy-per-byte", a.cpu_energy_per_byte)->capture_default_str();
  app.add_option("--npu-energy-per-byte", a.npu_energy_per_byte)->capture_default_str();
  app.add_option("--sync-energy", a.sync_energy)->capture_default_str();
  app.add_option("--graph-limit", a.graph_size_limit, "largest npu graph in bytes")->capture_default_str();
  app.add_option("--small-rows-threshold", c.small_rows_threshold)->capture_default_str();
  app.add_option("--small-rows-penalty", c.small_rows_penalty)->capture_default_str();
  app.add_option("--attention-cost", c.attention_cost)->capture_default_str();
  app.add_option("--orchestration-cost", c.orchestration_cost)->capture_default_str();
  app.add_option("--seed", c.seed)->capture_default_str();
  app.add_option("--zipf-s", c.zipf_s, "popularity skew")->capture_default_str();
  app.add_option("--jitter", c.layer_jitter, "cross-layer popularity variation")->capture_default_str();
  app.add_option("--calibration-tokens", c.calibration_tokens, "0: same as the prompt length")
      ->capture_default_str();
  app.add_option("--overlap-k", c.overlap_k)->capture_default_str();
  app.add_option("--verify", c.verify, "check every layer against the oracle")->capture_default_str();
}

RunConfig finalize(Options& o) {
  o.config.mode = parse_mode(o.mode);
  o.config.overflow = parse_overflow_policy(o.overflow);
  o.config.validate();
  return o.config;
}

struct Inputs {
  std::string trace;
  std::string profile;
  std::optional<RoutingTrace> trace_data;
  std::optional<CalibrationProfile> profile_data;

  PrefillInputs load() {
    if (!trace.empty()) trace_data = ingest_trace(trace);
    if (!profile.empty()) profile_data = load_profile(profile);
    return {trace_data ? &*trace_data : nullptr, profile_data ? &*profile_data : nullptr};
  }
};

void add_input_flags(CLI::App& sub, Inputs& in) {
  sub.add_option("--trace", in.trace, "replay this prompt trace instead of a generated workload");
  sub.add_option("--profile", in.profile, "calibration profile to plan from");
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
  } else {
    write_text(path, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated static-graph MoE prefill with capacity tiers and grouped experts"};
  app.set_config("--config", "", "TOML/INI file setting any flag; command-line flags win");
  app.require_subcommand(1);
  app.fallthrough();
  Options opts;
  add_config_flags(app, opts);

  std::string out_path;
  std::size_t gen_tokens = 0;
  auto* gen = app.add_subcommand("gen-trace", "write a synthetic routing trace");
  gen->add_option("--out", out_path, "trace file")->required();
  gen->add_option("--tokens", gen_tokens, "tokens to generate (0: prompt length)");

  std::vector<std::string> cal_traces;
  auto* cal = app.add_subcommand("calibrate", "count expert usage over traces into a profile");
  cal->add_option("--traces", cal_traces, "trace files")->required();
  cal->add_option("--out", out_path, "profile file")->required();

  Inputs plan_in;
  auto* plan = app.add_subcommand("plan", "capacity and placement summary for a profile");
  plan->add_option("--profile", plan_in.profile, "calibration profile")->required();
  plan->add_option("--trace", plan_in.trace, "prompt trace (needed by naive-offload)");
  plan->add_option("--out", out_path, "summary JSON (default stdout)");

  Inputs run_in;
  std::string csv_path, json_path, plot_path;
  auto* run = app.add_subcommand("run", "chunked prefill under one mode");
  add_input_flags(*run, run_in);
  run->add_option("--csv", csv_path, "per-layer CSV report (default stdout)");
  run->add_option("--json", json_path, "full JSON report");
  run->add_option("--plotdata", plot_path, "stage breakdown JSON");

  Inputs sweep_in;
  std::string axis_text;
  std::vector<std::uint64_t> values;
  auto* sw = app.add_subcommand("sweep", "one run per value of capacity, group_size or chunk_size");
  add_input_flags(*sw, sweep_in);
  sw->add_option("--axis", axis_text, "capacity | group_size | chunk_size")->required();
  sw->add_option("--values", values, "comma separated")->delimiter(',')->required();
  sw->add_option("--csv", csv_path, "summary CSV (default stdout)");
  sw->add_option("--plotdata", plot_path, "sweep series JSON");

  Inputs abl_in;
  std::string report_dir;
  auto* abl = app.add_subcommand("ablate", "every mode on the same workload");
  add_input_flags(*abl, abl_in);
  abl->add_option("--csv", csv_path, "summary CSV (default stdout)");
  abl->add_option("--report-dir", report_dir, "also write <mode>.csv per mode here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    RunConfig config = finalize(opts);
    if (gen->parsed()) {
      const RoutingTrace trace = generate_workload(config.workload(gen_tokens > 0 ? gen_tokens : config.prompt_length));
      export_trace(trace, out_path);
    } else if (cal->parsed()) {
      std::vector<RoutingTrace> traces;
      for (const auto& p : cal_traces) traces.push_back(ingest_trace(p));
      const CalibrationProfile profile = profile_traces(traces);
      save_profile(profile, out_path);
      fmt::print(stderr, "profile: E={} L={} tokens={}\n", profile.num_experts, profile.num_layers,
                 profile.total_tokens);
    } else if (plan->parsed()) {
      const CalibrationProfile profile = load_profile(plan_in.profile);
      std::optional<RoutingTrace> prompt;
      if (!plan_in.trace.empty()) prompt = ingest_trace(plan_in.trace);
      RunReport summary;
      summary.config = config;
      summary.plan = build_static_plan(config, profile, prompt ? &*prompt : nullptr);
      for (std::size_t l = 0; l < profile.num_layers; ++l) summary.imbalance_ratios.push_back(profile.imbalance_ratio(l));
      auto j = report_json(summary);
      nlohmann::ordered_json out;
      out["config"] = j["config"];
      out["plan"] = j["plan"];
      out["imbalance_ratio"] = summary.imbalance_ratios;
      emit(out_path, out.dump(2) + "\n");
    } else if (run->parsed()) {
      const RunReport report = run_prefill(config, run_in.load());
      emit(csv_path, report_csv(report));
      if (!json_path.empty()) write_text(json_path, report_json(report).dump(2) + "\n");
      if (!plot_path.empty()) write_text(plot_path, report_plotdata(report).dump(2) + "\n");
    } else if (sw->parsed()) {
      const SweepResult result = sweep(config, parse_sweep_axis(axis_text), values, sweep_in.load());
      emit(csv_path, sweep_csv(result));
      if (!plot_path.empty()) write_text(plot_path, sweep_plotdata(result).dump(2) + "\n");
      for (const auto& p : result.points) {
        if (!p.report) fmt::print(stderr, "{}={}: run failed: {}\n", to_string(result.axis), p.value, p.error);
      }
    } else if (abl->parsed()) {
      const PrefillInputs inputs = abl_in.load();
      std::vector<RunReport> reports;
      if (!report_dir.empty()) fs::create_directories(report_dir);
      for (Mode m : all_modes()) {
        RunConfig c = config;
        c.mode = m;
        reports.push_back(run_prefill(c, inputs));
        if (!report_dir.empty()) {
          write_text(fs::path(report_dir) / (std::string(to_string(m)) + ".csv"), report_csv(reports.back()));
        }
      }
      emit(csv_path, ablation_csv(reports));
    }
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfig;
  } catch (const VersionError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfig;
  } catch (const ValidationError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfig;
  } catch (const IoError& e) {
    fmt::print(stderr, "io error: {}\n", e.what());
    return kIo;
  } catch (const fs::filesystem_error& e) {
    fmt::print(stderr, "io error: {}\n", e.what());
    return kIo;
  } catch (const InvariantError& e) {
    fmt::print(stderr, "invariant violation: {}\n", e.what());
    return kInvariant;
  } catch (const RunFailure& e) {
    fmt::print(stderr, "run failure: {}\n", e.what());
    return kConfig;
  }
  return kOk;
}
