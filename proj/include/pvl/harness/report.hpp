// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pvl/harness/experiment.hpp"

namespace pvl::harness {

inline constexpr int kReportSchemaVersion = 1;

struct ReportOptions {
  /// Wall times vary between runs; leave them out for byte-stable reports.
  bool include_timing = false;
};

nlohmann::json config_to_json(const ExperimentConfig &config);
/// Missing keys keep their defaults; wrong types throw ParseError.
ExperimentConfig config_from_json(const nlohmann::json &j);

std::string report_to_json(const RunReport &report, const ReportOptions &options = {});
/// Throws ParseError on malformed input or an unsupported schema version.
RunReport report_from_json(std::string_view text);

struct CsvRow {
  std::size_t session = 0;
  double accuracy = 0.0;
  double a_base = 0.0;
  double a_last = 0.0;
  double a_avg = 0.0;
  double fgt = 0.0;

  bool operator==(const CsvRow &) const = default;
};

inline constexpr std::string_view kCsvHeader = "session,accuracy,a_base,a_last,a_avg,fgt";

/// One row per session; run-level metrics repeat on every row.
std::vector<CsvRow> report_csv_rows(const RunReport &report);
std::string csv_to_text(const std::vector<CsvRow> &rows);
/// Throws ParseError naming the line.
std::vector<CsvRow> csv_from_text(std::string_view text);

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

void write_text_file(const std::filesystem::path &path, std::string_view text);
std::string read_text_file(const std::filesystem::path &path);

} // namespace pvl::harness
