// Copyright (C) 2026 The tiermoe Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "tiermoe/error.hpp"
#include "tiermoe/report.hpp"

namespace tiermoe {
namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

RunConfig small_config() {
  RunConfig c;
  c.prompt_length = 256;
  c.chunk_size = 128;
  c.num_layers = 2;
  c.hidden_dim = 16;
  c.ffn_dim = 32;
  return c;
}

TEST(ReportCsv, GoldenHeader) {
  const auto csv = report_csv(run_prefill(small_config()));
  const std::string golden =
      "mode,chunk,layer,tokens,latency,energy_compute,energy_comm,ept,cpu_cycles,launches,accel_launches,syncs,"
      "routed_slots,padded_rows,dropped_tokens,attention_time,router_time,pack_time,expert_ffn_time,scatter_time,"
      "cpu_busy,accel_busy,max_rel_err";
  EXPECT_EQ(csv.substr(0, csv.find('\n')), golden);
}

TEST(ReportCsv, RowLayout) {
  const auto rows = parse_csv(report_csv(run_prefill(small_config())));
  // header + 2 chunks x 2 layers + 2 chunk rows + 1 overall
  ASSERT_EQ(rows.size(), 1u + 4 + 2 + 1);
  for (const auto& r : rows) EXPECT_EQ(r.size(), kReportColumns.size());
  EXPECT_EQ(rows[5][2], "all");
  EXPECT_EQ(rows[7][1], "all");
  EXPECT_EQ(rows[7][2], "all");
}

TEST(ReportCsv, AggregateRowsAreSumsOfLayerRows) {
  const auto rows = parse_csv(report_csv(run_prefill(small_config())));
  // Additive columns: tokens is the chunk's count, not a sum over layers.
  const std::vector<std::size_t> additive{4, 5, 6, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21};
  for (std::size_t chunk = 0; chunk < 2; ++chunk) {
    const auto& agg = rows[5 + chunk];
    for (std::size_t col : additive) {
      const double sum = std::stod(rows[1 + 2 * chunk][col]) + std::stod(rows[2 + 2 * chunk][col]);
      EXPECT_NEAR(std::stod(agg[col]), sum, 1e-6 * (1.0 + std::abs(sum))) << kReportColumns[col];
    }
    const double energy = std::stod(agg[5]) + std::stod(agg[6]);
    EXPECT_NEAR(std::stod(agg[7]), energy / std::stod(agg[3]), 1e-6 * std::stod(agg[7]));
  }
  const auto& total = rows[7];
  EXPECT_EQ(std::stoul(total[3]), 256u);
  for (std::size_t col : additive) {
    const double sum = std::stod(rows[5][col]) + std::stod(rows[6][col]);
    EXPECT_NEAR(std::stod(total[col]), sum, 1e-6 * (1.0 + std::abs(sum))) << kReportColumns[col];
  }
}

TEST(ReportCsv, Deterministic) {
  EXPECT_EQ(report_csv(run_prefill(small_config())), report_csv(run_prefill(small_config())));
}

TEST(ReportJson, CarriesConfigPlanAndCalibration) {
  const auto j = report_json(run_prefill(small_config()));
  EXPECT_EQ(j["config"]["mode"], "ours-all");
  EXPECT_EQ(j["config"]["chunk-size"], 128);
  EXPECT_EQ(j["chunks"].size(), 2u);
  EXPECT_EQ(j["plan"]["layers"].size(), 2u);
  EXPECT_TRUE(j["calibration"].contains("overlap_median"));
  const auto p = report_plotdata(run_prefill(small_config()));
  EXPECT_EQ(p["stages"].size(), kNumStages);
  EXPECT_EQ(p["layers"].size(), 4u);
}

TEST(SweepCsv, FailedPointsAreMarked) {
  const auto s = sweep(small_config(), SweepAxis::chunk_size, std::vector<std::uint64_t>{64, 4096});
  const auto rows = parse_csv(sweep_csv(s));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1][3], "ok");
  EXPECT_EQ(rows[2][3].rfind("\"failed", 0), 0u);
}

TEST(WriteText, UnwritablePathIsIoError) {
  EXPECT_THROW(write_text("/nonexistent-dir/x.csv", "a"), IoError);
}

}  // namespace
}  // namespace tiermoe
