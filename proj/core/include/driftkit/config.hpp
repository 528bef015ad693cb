#pragma once

#include "driftkit/activation_cache.hpp"
#include "driftkit/corpus.hpp"
#include "driftkit/eval_stats.hpp"
#include "driftkit/probes.hpp"
#include "driftkit/verification.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace driftkit {

struct CorpusEntry {
  std::string name;
  std::filesystem::path corpus_path;
  std::filesystem::path cache_path;
  CorpusFormat format = CorpusFormat::TeacherForced;
};

struct StatsConfig {
  std::size_t n_bootstrap = kDefaultBootstrap;
  std::size_t n_permutations = kDefaultPermutations;
};

struct StackerConfig {
  std::vector<std::string> components = {"approach_a", "approach_c", "drift", "approach_f"};
  std::size_t outer_folds = 5;
  std::size_t inner_folds = 5;
};

/// Stands for "the whole training split" in a budget grid.
inline constexpr std::size_t kBudgetFull = std::numeric_limits<std::size_t>::max();

struct BudgetConfig {
  /// Ascending; kBudgetFull may only come last.
  std::vector<std::size_t> sizes = {25, 50, 100, 250, 500, kBudgetFull};
  std::size_t seeds = 10;
};

struct ExperimentConfig {
  std::vector<CorpusEntry> corpora;
  std::vector<std::string> methods;
  std::vector<double> tap_fractions = kDefaultTapFractions;
  SplitSpec split;
  StatsConfig stats;
  BudgetConfig budget;
  StackerConfig stacker;
  VerdictRules rules;
  MlpConfig mlp;
  /// Method used by transfer, budget and the perturbation ablation.
  std::string focus_method = "drift";
  std::size_t threads = 1;
  std::uint64_t seed = 42;
};

/// Every method name the harness understands, in report order.
const std::vector<std::string>& known_methods();
bool is_known_method(const std::string& name);

/// JSON config. Relative paths resolve against `base_dir`. With
/// `check_paths`, every corpus and cache file must exist.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {},
                              bool check_paths = true);
ExperimentConfig load_config(const std::filesystem::path& path, bool check_paths = true);
std::string config_to_json(const ExperimentConfig& config);

/// Applies a --seed override everywhere a seed is used.
void override_seed(ExperimentConfig& config, std::uint64_t seed);

}  // namespace driftkit
