#pragma once

#include "driftkit/harness.hpp"
#include "driftkit/stacker.hpp"
#include "driftkit/verification.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace driftkit {

struct RunResults {
  std::optional<GridResult> grid;
  std::optional<TransferMatrix> transfer;
  std::vector<BudgetPoint> budget;
  std::vector<AblationRow> layer_ablation;
  std::vector<AblationRow> perturb_ablation;
  std::vector<StackerResult> stacker;

  bool empty() const noexcept;
};

enum class ReportFormat { Csv, Markdown, PlotData };

ReportFormat report_format_from_string(const std::string& name);

/// Verification rows of every grid cell.
VerificationReport verification_from_grid(const GridResult& grid);

std::string format_cells_csv(const GridResult& grid);
std::string format_transfer_csv(const TransferMatrix& transfer);
std::string format_budget_csv(const std::vector<BudgetPoint>& budget);
std::string format_ablation_csv(const std::vector<AblationRow>& rows);
std::string format_stacker_csv(const std::vector<StackerResult>& stacker);
/// Long format: corpus,method,auroc, one row per grid cell.
std::string format_heatmap_csv(const GridResult& grid);
/// corpus,method,fpr,tpr for every cell with test scores.
std::string format_roc_csv(const GridResult& grid);

/// Writes the files for one format into `out_dir` and returns their paths.
/// Output is byte-stable for identical results. Csv: cells.csv,
/// transfer.csv, budget.csv, layer_ablation.csv, perturb_ablation.csv,
/// stacker.csv. Markdown: verification.md, verification.csv, summary.md.
/// PlotData: plotdata/*.csv.
std::vector<std::filesystem::path> emit_report(const RunResults& results, ReportFormat format,
                                               const std::filesystem::path& out_dir);

}  // namespace driftkit
