#pragma once

#include "driftkit/config.hpp"
#include "driftkit/harness.hpp"
#include "driftkit/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace driftkit {

/// A stackable detector. `fit(rows)` trains on those rows of the shared
/// example set and returns a function scoring any other rows.
struct StackerComponent {
  using RowScorer = std::function<std::vector<double>(const IndexList& rows)>;
  std::string name;
  std::function<RowScorer(const IndexList& fit_rows)> fit;
};

/// Component whose scores are fixed in advance (nothing to fit).
StackerComponent fixed_component(std::string name, std::vector<double> scores);

struct StackerFold {
  IndexList test_rows;
  std::vector<double> test_scores;
  double auroc = 0.5;
  double meta_C = 0.0;
  /// Held-out AUROC of each component on this fold, in component order.
  std::vector<double> component_auroc;
};

struct StackerResult {
  std::string corpus;
  std::vector<std::string> components;
  /// Requested components that could not run, with the reason.
  std::vector<std::pair<std::string, std::string>> unavailable;
  std::vector<StackerFold> folds;
  /// AUROC of all outer-test scores pooled together.
  double pooled_auroc = 0.5;
  double mean_fold_auroc = 0.5;
  /// Pooled AUROC of each component's outer-test scores.
  std::vector<double> component_auroc;
};

/// Nested cross-validation. For each outer fold, inner folds over the
/// outer-train rows give out-of-fold component scores; a logistic meta-model
/// (C by CV over the inner folds) is fitted on them. Components are then
/// refitted on all outer-train rows to score the outer-test fold.
StackerResult nested_stacker(const std::vector<StackerComponent>& components, const Labels& labels,
                             std::size_t outer_folds = 5, std::size_t inner_folds = 5, std::uint64_t seed = 42);

/// Stacker over harness methods on one corpus. Components that are not
/// applicable to the corpus are dropped and listed; ComponentUnavailable if
/// none remain.
StackerResult run_stacker(const CorpusData& data, const ExperimentConfig& config, LeakAudit* audit = nullptr);

}  // namespace driftkit
