#include "driftkit/perturb.hpp"

#include "driftkit/error.hpp"
#include "driftkit/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>

namespace driftkit {

namespace {

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string_view text(std::string_view s) const { return s.substr(begin, end - begin); }
};

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_word(char c) { return is_alpha(c) || c == '\''; }

std::vector<Span> runs(std::string_view s, bool (*pred)(char)) {
  std::vector<Span> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!pred(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && pred(s[j])) ++j;
    out.push_back({i, j});
    i = j;
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

PerturbedText unchanged(std::string_view response) { return {std::string(response), true}; }

PerturbedText entity_swap(std::string_view r, Rng& rng) {
  std::vector<Span> entities;
  std::vector<std::string> seen;
  for (const auto& sp : runs(r, is_alpha)) {
    const auto word = sp.text(r);
    const bool capitalized = word.size() >= 2 && std::isupper(static_cast<unsigned char>(word[0]));
    if (!capitalized) continue;
    if (std::find(seen.begin(), seen.end(), word) != seen.end()) continue;
    seen.emplace_back(word);
    entities.push_back(sp);
  }
  if (entities.size() < 2) return unchanged(r);
  auto i = static_cast<std::size_t>(rng.below(entities.size()));
  auto j = static_cast<std::size_t>(rng.below(entities.size() - 1));
  if (j >= i) ++j;
  if (i > j) std::swap(i, j);
  const Span a = entities[i], b = entities[j];
  std::string out;
  out.append(r.substr(0, a.begin));
  out.append(b.text(r));
  out.append(r.substr(a.end, b.begin - a.end));
  out.append(a.text(r));
  out.append(r.substr(b.end));
  return {out, false};
}

PerturbedText numerical_corruption(std::string_view r, Rng& rng) {
  const auto digit_runs = runs(r, is_digit);
  if (digit_runs.empty()) return unchanged(r);
  const Span run = digit_runs[rng.below(digit_runs.size())];
  const std::size_t len = run.end - run.begin;
  const std::size_t pos = run.begin + static_cast<std::size_t>(rng.below(len));
  const char old = r[pos];
  std::vector<char> choices;
  for (char c = '0'; c <= '9'; ++c) {
    if (c == old) continue;
    if (c == '0' && pos == run.begin && len > 1) continue;  // no new leading zero
    choices.push_back(c);
  }
  std::string out(r);
  out[pos] = choices[rng.below(choices.size())];
  return {out, false};
}

PerturbedText negation_flip(std::string_view r) {
  static const std::array<std::string_view, 3> kNegators = {"not", "never", "no"};
  static const std::array<std::string_view, 19> kAuxiliaries = {
      "is", "are", "was", "were", "am", "can", "could", "will", "would", "should",
      "does", "do", "did", "has", "have", "had", "may", "might", "must"};
  const auto words = runs(r, is_word);
  for (const auto& sp : words) {
    const std::string w = lower(sp.text(r));
    if (std::find(kNegators.begin(), kNegators.end(), w) != kNegators.end()) {
      // Drop the negator together with one neighbouring space.
      std::size_t b = sp.begin, e = sp.end;
      if (e < r.size() && r[e] == ' ') {
        ++e;
      } else if (b > 0 && r[b - 1] == ' ') {
        --b;
      }
      std::string out(r.substr(0, b));
      out.append(r.substr(e));
      return {out, false};
    }
    if (w.size() > 3 && w.ends_with("n't")) {
      std::string stem(sp.text(r).substr(0, sp.end - sp.begin - 3));
      if (w == "can't") stem = sp.text(r).substr(0, 3);
      if (w == "won't") stem = std::string(sp.text(r).substr(0, 1)) + "ill";
      std::string out(r.substr(0, sp.begin));
      out.append(stem);
      out.append(r.substr(sp.end));
      return {out, false};
    }
  }
  for (const auto& sp : words) {
    const std::string w = lower(sp.text(r));
    if (std::find(kAuxiliaries.begin(), kAuxiliaries.end(), w) != kAuxiliaries.end()) {
      std::string out(r.substr(0, sp.end));
      out.append(" not");
      out.append(r.substr(sp.end));
      return {out, false};
    }
  }
  return unchanged(r);
}

PerturbedText boundary_violation(std::string_view r, Rng& rng) {
  static const std::array<std::string_view, 6> kClauses = {
      "and the orbital period of Neptune was renegotiated by the harbour authority.",
      "which is why the violin sonata was filed under maritime tax law.",
      "according to the 1897 census of lunar lighthouses.",
      "while the recipe calls for three cups of granite.",
      "as ratified by the international committee on dream cartography.",
      "because the railway timetable is written in reverse chronology.",
  };
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < r.size()) {
    while (i < r.size() && std::isspace(static_cast<unsigned char>(r[i]))) ++i;
    std::size_t j = i;
    while (j < r.size() && !std::isspace(static_cast<unsigned char>(r[j]))) ++j;
    if (j > i) words.push_back(r.substr(i, j - i));
    i = j;
  }
  if (words.empty()) return unchanged(r);
  const std::size_t keep = std::max<std::size_t>(1, words.size() - words.size() / 4);
  std::string out;
  for (std::size_t k = 0; k < keep; ++k) {
    if (k) out.push_back(' ');
    out.append(words[k]);
  }
  out.push_back(' ');
  out.append(kClauses[rng.below(kClauses.size())]);
  return {out, false};
}

}  // namespace

PerturbedText perturb(Perturbation strategy, std::string_view prompt, std::string_view response, std::uint64_t seed) {
  if (response.empty()) return unchanged(response);
  Rng rng(seed ^ mix64(fnv1a(prompt)) ^ fnv1a(response), static_cast<std::uint64_t>(strategy));
  switch (strategy) {
    case Perturbation::EntitySwap:
      return entity_swap(response, rng);
    case Perturbation::NumericalCorruption:
      return numerical_corruption(response, rng);
    case Perturbation::NegationFlip:
      return negation_flip(response);
    case Perturbation::BoundaryViolation:
      return boundary_violation(response, rng);
  }
  return unchanged(response);
}

std::map<Perturbation, PerturbedText> perturbation_texts(std::string_view prompt, std::string_view response,
                                                         std::uint64_t seed) {
  std::map<Perturbation, PerturbedText> out;
  for (auto p : kAllPerturbations) out.emplace(p, perturb(p, prompt, response, seed));
  return out;
}

void write_perturbation_sidecar(const Corpus& corpus, const std::filesystem::path& path, std::uint64_t seed) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  for (const auto& ex : corpus.examples) {
    for (const auto& [p, t] : perturbation_texts(ex.prompt, ex.response, seed)) {
      nlohmann::ordered_json obj;
      obj["example_id"] = ex.example_id;
      obj["strategy"] = to_string(p);
      obj["text"] = t.text;
      obj["inapplicable"] = t.inapplicable;
      out << obj.dump() << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

}  // namespace driftkit
