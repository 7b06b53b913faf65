#pragma once

#include "infomae/evaluation.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace infomae {

struct ResultRow {
  double ratio = 0;
  std::string variant;
  std::uint64_t seed = 0;
  double accuracy = 0;
  double macro_f1 = 0;
};

// Tab-separated with a fixed header; malformed content errors with the line
// number.
void write_results_tsv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_tsv(const std::filesystem::path& path);

// Companion (ratio, variant) aggregation: mean and stdev over seeds.
void write_aggregate_tsv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);

// Deterministic byte output given the rows.
std::string render_summary_table(const std::vector<ResultRow>& rows);
std::string render_report_svg(const std::vector<ResultRow>& rows);

}  // namespace infomae
