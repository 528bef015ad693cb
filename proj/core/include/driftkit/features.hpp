#pragma once

#include "driftkit/activation_cache.hpp"
#include "driftkit/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace driftkit {

enum class Recipe {
  Drift,
  DriftConcat,
  Saplma,
  HalluShift,
  ActVariance,
  PerturbDelta,
  AnswerExpect,
  LogProbStats,
  CaaScore,
};

std::string to_string(Recipe recipe);
Recipe recipe_from_string(const std::string& name);

/// Examples x feature dims, tagged with the recipe that produced it.
struct FeatureMatrix {
  Recipe recipe = Recipe::Drift;
  Matrix data;
  std::vector<std::string> example_ids;
  /// Rows where a cosine touched a zero vector and was defined as 0.
  std::size_t degenerate_cosines = 0;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(data.rows()); }
  std::size_t feature_dim() const noexcept { return static_cast<std::size_t>(data.cols()); }
};

/// Expected width of a recipe. `taps` is the number of layers the recipe
/// consumes (for DriftConcat, the subset size); `strategies` only matters
/// for PerturbDelta.
std::size_t recipe_dim(Recipe recipe, std::size_t taps, std::size_t hidden_dim, std::size_t strategies = 4);

/// Number of unordered tap pairs, C(taps, 2).
constexpr std::size_t pair_count(std::size_t taps) noexcept { return taps * (taps - 1) / 2; }

/// Cosine similarity; 0 (and `degenerate` set) when either vector is zero.
double cosine_or_zero(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b, bool* degenerate = nullptr);

/// Inter-layer transition features. For every tap pair (a, b), a < b, in
/// lexicographic order: [h_b - h_a, cos(h_a, h_b), ||h_b - h_a||].
/// `sample` selects which pooled sample to use.
Vector drift_features(const ActivationRecord& record, std::size_t sample = 0, bool* degenerate = nullptr);
Vector drift_features(const MatrixF& pooled, bool* degenerate = nullptr);

/// Concatenated pooled states at the given tap positions (default: first three).
Vector drift_concat_features(const ActivationRecord& record, std::span<const std::size_t> tap_positions = {});

/// Last-token state at one tap position.
Vector saplma_features(const ActivationRecord& record, std::size_t tap_position);

/// 1 - cos between the pooled states at the 0.60 and 0.85 taps.
double hallushift_score(const ActivationRecord& record, const LayerTapSpec& taps);

/// Per-dimension population variance across the S pooled samples, [taps * d].
Vector variance_features(const ActivationRecord& record);

struct CaaDirection {
  /// Mean of (correct - hallucinated) pooled states, flattened [taps * d].
  Vector direction;
  bool degenerate = false;
};

/// Needs paired states on every record. Returns a flagged direction when the
/// differences cancel to (numerically) zero.
CaaDirection caa_direction(std::span<const ActivationRecord* const> train_records);
/// cos(h(p, r), v_CAA) on the flattened pooled state.
double caa_score(const ActivationRecord& record, const CaaDirection& direction);

/// One row per strategy in `strategies` (all present ones when empty):
/// flattened h(p, r) - h(p, r').
Matrix perturb_delta_features(const ActivationRecord& record, std::span<const Perturbation> strategies = {});

/// [h_after - h_before, cos(h_before, h_after), ||h_before - h_after||].
Vector answer_expect_features(const ActivationRecord& record, bool* degenerate = nullptr);

/// mean, min, population variance, least-squares slope, entropy_proxy (= -mean).
Vector logprob_stats(std::span<const double> token_logprobs);
Vector logprob_stats(const ActivationRecord& record);

/// Flattened pooled state of one sample, [taps * d] in tap-major order.
Vector flat_pooled(const ActivationRecord& record, std::size_t sample = 0);

/// Options for assembling one recipe over many records.
struct RecipeOptions {
  /// DriftConcat tap positions (default first three); Saplma tap position (default last).
  std::vector<std::size_t> tap_positions;
  /// PerturbDelta strategies; empty = every strategy in the cache.
  std::vector<Perturbation> strategies;
  /// Required by HalluShift to locate the 0.60 / 0.85 taps.
  std::optional<LayerTapSpec> taps;
  /// Required by CaaScore; fitted on training rows beforehand.
  const CaaDirection* caa = nullptr;
};

/// Builds one recipe row per record in order. Throws the per-recipe errors.
FeatureMatrix build_features(Recipe recipe, std::span<const ActivationRecord> records, const RecipeOptions& options = {});

}  // namespace driftkit
