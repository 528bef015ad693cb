#pragma once

#include "driftkit/corpus.hpp"

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace driftkit {

struct TokenizerConfig {
  bool lowercase = true;
  /// Minimum token length in characters (UTF-8 continuation bytes excluded).
  std::size_t min_token_length = 2;
};

/// Splits on anything that is not an ASCII letter/digit or a non-ASCII byte,
/// so multi-byte UTF-8 letters stay inside words.
std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& config = {});

/// Sparse row: (column, weight) sorted by column.
using SparseVector = std::vector<std::pair<std::size_t, double>>;

struct TfidfModel {
  /// Term -> column; columns are assigned in lexicographic term order.
  std::map<std::string, std::size_t> vocabulary;
  std::vector<double> idf;
  TokenizerConfig tokenizer;
  bool smooth_idf = true;
  std::size_t n_documents = 0;

  std::size_t size() const noexcept { return idf.size(); }
  /// Raw term counts times idf, L2-normalized. All-zero for out-of-vocabulary text.
  SparseVector transform(std::string_view text) const;
};

/// idf_t = ln((1 + n) / (1 + df_t)) + 1.
TfidfModel fit_tfidf(const std::vector<std::string>& texts, const TokenizerConfig& config = {});

double sparse_cosine(const SparseVector& a, const SparseVector& b);

/// Cosine of the two TF-IDF vectors; 0 when either vector is all-zero.
double txtemb_score(const TfidfModel& model, std::string_view hal_text, std::string_view ref_text);

/// Every reference, hallucinated and response text of the corpus.
std::vector<std::string> txtemb_fit_texts(const Corpus& corpus);

struct TxtembResult {
  double auroc = 0.5;
  /// True when high similarity-to-reference, not low, marked hallucinations.
  bool flipped = false;
  /// Per-example cosine of response vs reference_text.
  std::vector<double> similarities;
};

/// Scores every example by the similarity of its response to its reference
/// text and reports the orientation-corrected AUROC (always >= 0.5).
/// Throws MissingReference when an example lacks reference_text.
TxtembResult txtemb_auroc(const Corpus& corpus, const TfidfModel& model);

/// Fits the model on the corpus itself, then scores it.
TxtembResult txtemb_audit(const Corpus& corpus);

}  // namespace driftkit
