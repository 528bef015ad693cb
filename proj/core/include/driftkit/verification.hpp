#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace driftkit {

enum class Verdict { Validated, Partial, Artifact, NotApplicable, BelowThreshold, Error };

std::string to_string(Verdict verdict);
Verdict verdict_from_string(const std::string& name);

/// Thresholds and the rule precedence used by classify. All comparisons
/// against thresholds are strict.
///
/// For auroc > auroc_trigger, first match wins:
///   control undefined                       -> NotApplicable
///   CI or null missing                      -> IncompleteChecks (thrown)
///   gap missing                             -> MissingControl (thrown)
///   ci_low > ci_threshold, gap > gap_thr    -> Validated
///   |gap| < gap_thr                         -> Artifact (flagged)
///   method is TF-dependent, gap <= gap_thr  -> Artifact
///   ci_low > ci_threshold                   -> Partial
///   gap <= gap_thr                          -> Artifact
///   otherwise                               -> BelowThreshold (CI too wide)
/// Cells at or below the trigger are BelowThreshold.
struct VerdictRules {
  double auroc_trigger = 0.85;
  double ci_threshold = 0.80;
  double gap_threshold = 0.05;
  /// Methods whose signal depends on the answer being present in the prompt.
  std::vector<std::string> tf_dependent_methods = {"approach_b", "approach_f"};

  bool tf_dependent(const std::string& method) const;
};

struct CellInputs {
  std::string method;
  std::string corpus;
  double auroc = 0.5;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::optional<double> null_mean;
  std::optional<double> txtemb_auroc;
  /// Used when the control AUROC itself is not available (e.g. a published
  /// table). Ignored if txtemb_auroc is set.
  std::optional<double> txtemb_gap;
  /// false when the corpus has no reference texts for the text control.
  bool control_defined = true;
  /// Set when the cell failed upstream; yields an Error row.
  std::optional<std::string> error;
};

struct VerificationCell {
  std::string method;
  std::string corpus;
  double auroc = 0.5;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::optional<double> null_mean;
  std::optional<double> txtemb_auroc;
  std::optional<double> txtemb_gap;
  Verdict verdict = Verdict::BelowThreshold;
  bool flagged = false;
  std::string error;
};

VerificationCell classify(const CellInputs& inputs, const VerdictRules& rules = {});

struct VerificationReport {
  /// Sorted by corpus, then method.
  std::vector<VerificationCell> rows;
  std::map<Verdict, std::size_t> totals;
};

/// With `strict`, a cell missing a required check throws IncompleteChecks
/// naming every offending cell; otherwise such cells become Error rows.
VerificationReport verify_table(const std::vector<CellInputs>& cells, const VerdictRules& rules = {},
                                bool strict = true);

/// corpus,method,auroc,ci_low,ci_high,null_mean,txtemb_auroc,txtemb_gap,flagged,verdict,error
std::string format_verification_csv(const VerificationReport& report);
/// Aligned markdown table: corpus, method, AUROC, CI, null, gap, verdict.
std::string format_verification_markdown(const VerificationReport& report);

void write_verification(const VerificationReport& report, const std::filesystem::path& out_dir);

}  // namespace driftkit
