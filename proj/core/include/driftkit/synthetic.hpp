#pragma once

#include "driftkit/activation_cache.hpp"
#include "driftkit/corpus.hpp"
#include "driftkit/eval_stats.hpp"
#include "driftkit/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace driftkit {

/// Population AUROC of N(delta, 1) positives against N(0, 1) negatives: Phi(delta / sqrt(2)).
double gaussian_auroc(double delta);
/// Inverse of gaussian_auroc.
double gaussian_delta_for_auroc(double auroc);

/// Positives ~ N(delta, 1), negatives ~ N(0, 1).
ScoredSet gaussian_scored_set(std::size_t n_pos, std::size_t n_neg, double delta, std::uint64_t seed);

/// Where the label signal lives in the generated activations.
enum class SignalKind {
  /// label = 1[u . (h_to - h_from) + eps > 0]
  Drift,
  /// label = 1[u . h_to + eps > 0]
  SingleTap,
  /// labels are fair coin flips independent of every state
  None,
};

struct SyntheticSpec {
  std::string name = "synthetic";
  CorpusFormat format = CorpusFormat::TeacherForced;
  std::size_t n = 1000;
  std::size_t hidden_dim = 16;
  std::uint32_t total_layers = 20;
  std::vector<double> tap_fractions = kDefaultTapFractions;
  /// Pooled samples per example.
  std::size_t samples = 4;
  SignalKind signal = SignalKind::Drift;
  std::size_t signal_from = 0;
  std::size_t signal_to = 3;
  /// sd(eps) / sd(u . signal); 0.42 puts the Bayes AUROC near 0.95.
  double label_noise = 0.42;
  /// Planted direction (unit length, size hidden_dim); random when unset.
  std::optional<Vector> direction;
  /// Strength of the response-overlap component written into the states of
  /// teacher-forced corpora. Models the lexical shortcut.
  double text_leak = 2.0;
  /// Token log-probabilities shift by this much per unit of label.
  double logprob_signal = 0.3;
  /// Relative extra spread of pooled samples for positives.
  double variance_signal = 0.3;
  std::uint64_t seed = 42;
};

struct SyntheticData {
  Corpus corpus;
  std::vector<ActivationRecord> records;
  CacheHeader header;
  LayerTapSpec taps;
  Vector direction;
  /// Bayes-optimal score per example (the noiseless planted projection).
  std::vector<double> oracle_scores;
  /// Population AUROC of the oracle score, by Monte Carlo.
  double bayes_auroc = 0.5;
};

SyntheticData make_synthetic(const SyntheticSpec& spec);

/// Writes `<name>.jsonl` and `<name>.cache` into `dir`.
struct SyntheticFiles {
  std::filesystem::path corpus;
  std::filesystem::path cache;
};
SyntheticFiles write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

/// Random unit vector of width d.
Vector random_unit_vector(std::size_t d, std::uint64_t seed);

}  // namespace driftkit
