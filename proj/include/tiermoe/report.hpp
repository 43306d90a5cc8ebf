// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "json.hpp"
#include "tiermoe/prefill.hpp"

namespace tiermoe {

// Column order of the per-run CSV. Rows: one per (chunk, layer), then one
// per chunk with layer "all", then a final chunk "all", layer "all" row.
inline constexpr std::array<std::string_view, 23> kReportColumns{
    "mode",         "chunk",         "layer",          "tokens",         "latency",    "energy_compute",
    "energy_comm",  "ept",           "cpu_cycles",     "launches",       "accel_launches", "syncs",
    "routed_slots", "padded_rows",   "dropped_tokens", "attention_time", "router_time",    "pack_time",
    "expert_ffn_time", "scatter_time", "cpu_busy",     "accel_busy",     "max_rel_err"};

inline constexpr std::array<std::string_view, 12> kSweepColumns{
    "axis",     "value",   "mode",   "status",      "tokens",        "latency",
    "latency_per_token", "ept", "cpu_cycles", "launches", "padded_rows", "dropped_tokens"};

std::string report_csv(const RunReport& report);
nlohmann::ordered_json report_json(const RunReport& report);
// Stage breakdown per chunk and per layer, for stacked-bar plots.
nlohmann::ordered_json report_plotdata(const RunReport& report);

std::string sweep_csv(const SweepResult& result);
nlohmann::ordered_json sweep_plotdata(const SweepResult& result);

// One row per mode; same columns as a sweep with axis "mode".
std::string ablation_csv(std::span<const RunReport> reports);

// Writes text to path; failures raise IoError naming the path.
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace tiermoe
