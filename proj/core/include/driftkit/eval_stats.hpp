#pragma once

#include "driftkit/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace driftkit {

/// Scores paired with binary labels (1 = positive / hallucination).
struct ScoredSet {
  std::vector<double> scores;
  Labels labels;

  std::size_t positive_count() const;
  std::size_t negative_count() const;
};

/// Mann-Whitney AUROC from midranks (ties count 0.5), O(N log N).
double auroc(std::span<const double> scores, std::span<const int> labels);
inline double auroc(const ScoredSet& set) { return auroc(set.scores, set.labels); }

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Staircase from (0,0) to (1,1), one vertex per distinct score threshold.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);
double trapezoid_area(const std::vector<RocPoint>& curve);

struct BootstrapResult {
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_bootstrap = 0;
  /// Single-class draws that had to be redrawn.
  std::size_t redraws = 0;
  std::vector<double> replicates;
};

inline constexpr std::size_t kDefaultBootstrap = 1000;
inline constexpr std::size_t kDefaultPermutations = 30;

/// Percentile (2.5 / 97.5) interval over resampled AUROCs. Resample i uses
/// Rng(seed, i), so any partition of the iterations reproduces the serial run.
BootstrapResult bootstrap_ci(std::span<const double> scores, std::span<const int> labels,
                             std::size_t n_bootstrap = kDefaultBootstrap, std::uint64_t seed = 42);

/// Mean AUROC over `n_permutations` label shuffles; shuffle i uses Rng(seed, i).
double permutation_null(std::span<const double> scores, std::span<const int> labels,
                        std::size_t n_permutations = kDefaultPermutations, std::uint64_t seed = 42);

struct ResampleReport {
  double point_estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_bootstrap = 0;
  double null_mean = 0.0;
  std::size_t n_permutations = 0;
  std::uint64_t seed = 42;
};

ResampleReport resample_report(const ScoredSet& set, std::size_t n_bootstrap = kDefaultBootstrap,
                               std::size_t n_permutations = kDefaultPermutations, std::uint64_t seed = 42);

/// Linear-interpolated percentile (numpy's default) of unsorted values.
double percentile(std::vector<double> values, double q);

}  // namespace driftkit
