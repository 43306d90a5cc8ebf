// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "tiermoe/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <iterator>

#include "tiermoe/error.hpp"

namespace tiermoe {
namespace {

using nlohmann::ordered_json;

std::string num(double v) { return fmt::format("{:.10g}", v); }

std::string header(std::span<const std::string_view> columns) {
  std::string out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i > 0) out += ',';
    out += columns[i];
  }
  out += '\n';
  return out;
}

void append_metrics_row(std::string& out, std::string_view mode, std::string_view chunk, std::string_view layer,
                        const RunMetrics& m, double max_rel_err) {
  const auto& st = m.stage_time;
  fmt::format_to(std::back_inserter(out), "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                 mode, chunk, layer, m.tokens, num(m.ttft), num(m.energy_compute), num(m.energy_comm), num(m.ept),
                 m.cpu_cycles, m.launches, m.accel_launches, m.syncs, m.routed_slots, m.padded_rows,
                 m.dropped_tokens, num(st[0]), num(st[1]), num(st[2]), num(st[3]), num(st[4]), num(m.cpu_busy),
                 num(m.accel_busy), num(max_rel_err));
}

ordered_json metrics_json(const RunMetrics& m) {
  ordered_json j;
  j["tokens"] = m.tokens;
  j["latency"] = m.ttft;
  j["energy_compute"] = m.energy_compute;
  j["energy_comm"] = m.energy_comm;
  j["ept"] = m.ept;
  j["cpu_cycles"] = m.cpu_cycles;
  j["launches"] = m.launches;
  j["accel_launches"] = m.accel_launches;
  j["syncs"] = m.syncs;
  j["routed_slots"] = m.routed_slots;
  j["padded_rows"] = m.padded_rows;
  j["dropped_tokens"] = m.dropped_tokens;
  ordered_json stages;
  for (std::size_t s = 0; s < kNumStages; ++s) stages[std::string(to_string(static_cast<Stage>(s)))] = m.stage_time[s];
  j["stage_time"] = std::move(stages);
  j["cpu_busy"] = m.cpu_busy;
  j["accel_busy"] = m.accel_busy;
  return j;
}

ordered_json plan_json(const StaticPlan& plan) {
  ordered_json j;
  j["mode"] = to_string(plan.mode);
  if (!plan.capacity) {
    j["capacity"] = "dynamic";
    return j;
  }
  const auto& cap = *plan.capacity;
  auto tiers = cap.tiers.capacities();
  j["tiers"] = std::vector<std::uint32_t>(tiers.begin(), tiers.end());
  j["policy"] = to_string(cap.policy);
  j["chunk_tokens"] = cap.chunk_tokens;
  ordered_json layers = ordered_json::array();
  for (std::size_t l = 0; l < cap.num_layers(); ++l) {
    ordered_json layer;
    layer["capacity"] = cap.capacity[l];
    std::size_t flagged = 0;
    for (bool f : cap.overflow_flagged[l]) flagged += f ? 1 : 0;
    layer["overflow_flagged"] = flagged;
    ordered_json groups = ordered_json::array();
    if (l < plan.placement.layers.size()) {
      for (const auto& g : plan.placement.layers[l].groups) {
        ordered_json gj;
        gj["experts"] = g.group.expert_ids;
        gj["capacity"] = g.group.capacity;
        gj["device"] = to_string(g.device);
        gj["npu_cost"] = g.npu_cost;
        gj["cpu_cost"] = g.cpu_cost;
        gj["forced_cpu"] = g.forced_cpu;
        groups.push_back(std::move(gj));
      }
    }
    layer["groups"] = std::move(groups);
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  return j;
}

double per_token(double v, std::size_t tokens) { return tokens > 0 ? v / static_cast<double>(tokens) : 0.0; }

void append_summary_row(std::string& out, std::string_view axis, std::string_view value, std::string_view mode,
                        const RunReport* report, std::string_view error) {
  if (report == nullptr) {
    std::string quoted;
    for (char ch : error) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    fmt::format_to(std::back_inserter(out), "{},{},{},\"failed: {}\",,,,,,,,\n", axis, value, mode, quoted);
    return;
  }
  const auto& m = report->aggregate;
  fmt::format_to(std::back_inserter(out), "{},{},{},ok,{},{},{},{},{},{},{},{}\n", axis, value, mode, m.tokens,
                 num(m.ttft), num(per_token(m.ttft, m.tokens)), num(m.ept), m.cpu_cycles, m.launches, m.padded_rows,
                 m.dropped_tokens);
}

}  // namespace

std::string report_csv(const RunReport& report) {
  const std::string mode(to_string(report.config.mode));
  std::string out = header(kReportColumns);
  for (const auto& row : report.rows) {
    append_metrics_row(out, mode, std::to_string(row.chunk), std::to_string(row.layer), row.metrics, row.max_rel_err);
  }
  for (std::size_t c = 0; c < report.chunk_totals.size(); ++c) {
    double err = 0.0;
    for (const auto& row : report.rows) {
      if (row.chunk == c) err = std::max(err, row.max_rel_err);
    }
    append_metrics_row(out, mode, std::to_string(c), "all", report.chunk_totals[c], err);
  }
  append_metrics_row(out, mode, "all", "all", report.aggregate, report.max_rel_err);
  return out;
}

ordered_json report_json(const RunReport& report) {
  ordered_json j;
  j["version"] = 1;
  j["config"] = to_json(report.config);
  j["num_chunks"] = report.num_chunks;
  j["aggregate"] = metrics_json(report.aggregate);
  ordered_json chunks = ordered_json::array();
  for (const auto& m : report.chunk_totals) chunks.push_back(metrics_json(m));
  j["chunks"] = std::move(chunks);
  j["plan"] = plan_json(report.plan);
  ordered_json cal;
  cal["K"] = report.calibration.K;
  cal["overlap_per_layer"] = report.calibration.per_layer;
  cal["overlap_median"] = report.calibration.median;
  cal["overlap_mean"] = report.calibration.mean;
  cal["imbalance_ratio"] = report.imbalance_ratios;
  j["calibration"] = std::move(cal);
  j["max_rel_err"] = report.max_rel_err;
  return j;
}

ordered_json report_plotdata(const RunReport& report) {
  ordered_json j;
  j["mode"] = to_string(report.config.mode);
  std::vector<std::string> stages;
  for (std::size_t s = 0; s < kNumStages; ++s) stages.emplace_back(to_string(static_cast<Stage>(s)));
  j["stages"] = stages;
  ordered_json per_chunk = ordered_json::array();
  for (std::size_t c = 0; c < report.chunk_totals.size(); ++c) {
    const auto& m = report.chunk_totals[c];
    per_chunk.push_back({{"chunk", c}, {"stage_time", m.stage_time}, {"latency", m.ttft}, {"ept", m.ept}});
  }
  j["chunks"] = std::move(per_chunk);
  ordered_json per_layer = ordered_json::array();
  for (const auto& row : report.rows) {
    per_layer.push_back({{"chunk", row.chunk},
                         {"layer", row.layer},
                         {"stage_time", row.metrics.stage_time},
                         {"latency", row.metrics.ttft}});
  }
  j["layers"] = std::move(per_layer);
  j["total_stage_time"] = report.aggregate.stage_time;
  return j;
}

std::string sweep_csv(const SweepResult& result) {
  std::string out = header(kSweepColumns);
  const std::string axis(to_string(result.axis));
  for (const auto& p : result.points) {
    const std::string mode = p.report ? std::string(to_string(p.report->config.mode)) : "";
    append_summary_row(out, axis, std::to_string(p.value), mode, p.report ? &*p.report : nullptr, p.error);
  }
  return out;
}

ordered_json sweep_plotdata(const SweepResult& result) {
  ordered_json j;
  j["axis"] = to_string(result.axis);
  ordered_json points = ordered_json::array();
  for (const auto& p : result.points) {
    ordered_json pj;
    pj["value"] = p.value;
    if (p.report) {
      const auto& m = p.report->aggregate;
      pj["latency_per_token"] = per_token(m.ttft, m.tokens);
      pj["ept"] = m.ept;
      pj["launches"] = m.launches;
      pj["stage_time"] = m.stage_time;
    } else {
      pj["error"] = p.error;
    }
    points.push_back(std::move(pj));
  }
  j["points"] = std::move(points);
  return j;
}

std::string ablation_csv(std::span<const RunReport> reports) {
  std::string out = header(kSweepColumns);
  for (const auto& r : reports) {
    const std::string mode(to_string(r.config.mode));
    append_summary_row(out, "mode", mode, mode, &r, "");
  }
  return out;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw IoError(path.string() + ": write failed");
}

}  // namespace tiermoe
