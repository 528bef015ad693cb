#include "driftkit/txtemb.hpp"

#include "driftkit/error.hpp"
#include "driftkit/eval_stats.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

namespace driftkit {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

std::size_t utf8_length(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& config) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty() && utf8_length(current) >= config.min_token_length) out.push_back(current);
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      current.push_back(config.lowercase && c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    } else {
      flush();
    }
  }
  flush();
  return out;
}

SparseVector TfidfModel::transform(std::string_view text) const {
  std::map<std::size_t, double> counts;
  for (const auto& tok : tokenize(text, tokenizer)) {
    auto it = vocabulary.find(tok);
    if (it != vocabulary.end()) counts[it->second] += 1.0;
  }
  SparseVector row;
  row.reserve(counts.size());
  double norm2 = 0.0;
  for (const auto& [col, tf] : counts) {
    const double w = tf * idf[col];
    row.emplace_back(col, w);
    norm2 += w * w;
  }
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& [col, w] : row) w *= inv;
  }
  return row;
}

TfidfModel fit_tfidf(const std::vector<std::string>& texts, const TokenizerConfig& config) {
  std::map<std::string, std::size_t> df;
  std::size_t n_docs = 0;
  for (const auto& text : texts) {
    const auto toks = tokenize(text, config);
    if (toks.empty()) continue;
    ++n_docs;
    for (const auto& t : std::set<std::string>(toks.begin(), toks.end())) ++df[t];
  }
  if (n_docs == 0) throw Error(ErrorCode::EmptyCorpus, "no document contains a usable token");

  TfidfModel model;
  model.tokenizer = config;
  model.n_documents = n_docs;
  model.idf.reserve(df.size());
  std::size_t col = 0;
  for (const auto& [term, count] : df) {  // std::map iterates lexicographically
    model.vocabulary.emplace(term, col++);
    model.idf.push_back(std::log((1.0 + static_cast<double>(n_docs)) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  return model;
}

double sparse_cosine(const SparseVector& a, const SparseVector& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [c, w] : a) na += w * w;
  for (const auto& [c, w] : b) nb += w * w;
  if (na == 0.0 || nb == 0.0) return 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first == b[j].first) {
      dot += a[i].second * b[j].second;
      ++i;
      ++j;
    } else if (a[i].first < b[j].first) {
      ++i;
    } else {
      ++j;
    }
  }
  const double cos = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(cos, 0.0, 1.0);
}

double txtemb_score(const TfidfModel& model, std::string_view hal_text, std::string_view ref_text) {
  return sparse_cosine(model.transform(hal_text), model.transform(ref_text));
}

std::vector<std::string> txtemb_fit_texts(const Corpus& corpus) {
  std::vector<std::string> texts;
  for (const auto& ex : corpus.examples) {
    if (ex.reference_text) texts.push_back(*ex.reference_text);
    if (ex.hallucinated_text) texts.push_back(*ex.hallucinated_text);
    texts.push_back(ex.response);
  }
  return texts;
}

TxtembResult txtemb_auroc(const Corpus& corpus, const TfidfModel& model) {
  TxtembResult out;
  out.similarities.reserve(corpus.size());
  for (const auto& ex : corpus.examples) {
    if (!ex.reference_text) {
      throw Error(ErrorCode::MissingReference, "example '" + ex.example_id + "' has no reference_text");
    }
    out.similarities.push_back(txtemb_score(model, ex.response, *ex.reference_text));
  }
  // Default orientation: the less a response resembles its reference, the
  // more likely it is a hallucination.
  std::vector<double> hal_score(out.similarities.size());
  for (std::size_t i = 0; i < hal_score.size(); ++i) hal_score[i] = -out.similarities[i];
  const Labels labels = corpus.labels();
  const double a = auroc(hal_score, labels);
  out.flipped = a < 0.5;
  out.auroc = out.flipped ? 1.0 - a : a;
  return out;
}

TxtembResult txtemb_audit(const Corpus& corpus) { return txtemb_auroc(corpus, fit_tfidf(txtemb_fit_texts(corpus))); }

}  // namespace driftkit
