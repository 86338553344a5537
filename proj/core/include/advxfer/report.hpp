#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "advxfer/campaign.hpp"
#include "advxfer/metrics.hpp"

namespace advxfer {

/// Table rows "P_<source>", target columns, cells "ASR (TR)" with ASR in
/// percent (one decimal) and TR to two decimals; diagonal cells carry the ASR
/// only. Extra column mean_tr (transfer-out rate) and a final
/// vulnerability_score row.
std::string format_transfer_table_csv(const AsrTable& asr);

/// Heatmap of the transfer rates; darker is higher, the diagonal is gray.
std::string render_heatmap_svg(const TransferMatrix& m, const std::string& title);

/// Bars of ASR per target, grouped by source patch, annotated with the mean
/// cross-architecture value of each group.
std::string render_frame_efficacy_svg(const AsrTable& asr, const std::string& title);

/// Summary of a results directory recomputed from the raw JSONL logs.
/// Throws kMissingInput listing every absent input.
std::string compute_summary_json(const std::filesystem::path& results_dir);

/// Rewrites matrix/<scenario>_asr.csv and _tr.csv from the evaluation logs;
/// returns the scenario ids.
std::vector<std::string> rebuild_matrices(const std::filesystem::path& results_dir);

struct ReportBundle {
  std::vector<std::filesystem::path> files;
};

/// Writes report/<scenario>_table.csv, _asr.csv, _tr.csv, _heatmap.svg,
/// _frame_efficacy.svg and report/summary.json.
ReportBundle render_report(const std::filesystem::path& results_dir);

/// Recomputes the summary and compares it with report/summary.json.
bool verify_report(const std::filesystem::path& results_dir, std::string* diff = nullptr);

}  // namespace advxfer
