#pragma once

#include "driftkit/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace driftkit {

/// Teacher-forced corpora embed answer text in the prompt; live-generation
/// corpora do not. Always declared by the caller, never inferred.
enum class CorpusFormat { TeacherForced, LiveGeneration };

std::string to_string(CorpusFormat format);
CorpusFormat corpus_format_from_string(const std::string& name);

struct Example {
  std::string example_id;
  std::string prompt;
  std::string response;
  std::optional<std::string> reference_text;
  std::optional<std::string> hallucinated_text;
  /// 1 = hallucination.
  int label = 0;
  std::optional<double> entropy_target;
  std::optional<std::string> paired_correct_response;
  std::optional<std::string> paired_hallucinated_response;
};

struct LabelCounts {
  std::size_t negatives = 0;
  std::size_t positives = 0;
  bool operator==(const LabelCounts&) const = default;
};

struct Corpus {
  std::string name;
  CorpusFormat format = CorpusFormat::TeacherForced;
  std::vector<Example> examples;
  LabelCounts label_counts;

  std::size_t size() const noexcept { return examples.size(); }
  Labels labels() const;
  std::vector<std::string> ids() const;
};

LabelCounts count_labels(const std::vector<Example>& examples);

/// Parses one JSON object per line. Field names: example_id, prompt,
/// response, reference_text, hallucinated_text, label, entropy_target,
/// paired_correct_response, paired_hallucinated_response.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, std::string name = {});
Corpus parse_corpus(std::istream& in, CorpusFormat format, std::string name);
/// Validates invariants on an in-memory corpus and fills label_counts.
Corpus make_corpus(std::string name, CorpusFormat format, std::vector<Example> examples);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 42;
  std::size_t n_folds = 5;
};

struct Split {
  IndexList train;
  IndexList test;
};

/// Per-class largest-remainder split. Indices come back ascending.
Split stratified_split(const Labels& labels, const SplitSpec& spec);
Split stratified_split(const Corpus& corpus, const SplitSpec& spec);

/// Exactly `n_train` training rows drawn stratified from `pool`.
IndexList stratified_subsample(const IndexList& pool, const Labels& labels, std::size_t n_train,
                               std::uint64_t seed);

/// Fold id (0..n_folds-1) for each entry of `indices`. Class members are
/// dealt round-robin after a seeded shuffle, continuing the deal across
/// classes, so every fold is within one example of balanced per class.
std::vector<std::size_t> stratified_folds(const IndexList& indices, const Labels& labels, std::size_t n_folds,
                                          std::uint64_t seed);

/// Entries of `indices` split into (fit rows, held-out rows) for fold k.
std::pair<IndexList, IndexList> fold_partition(const IndexList& indices, const std::vector<std::size_t>& folds,
                                               std::size_t k);

}  // namespace driftkit
