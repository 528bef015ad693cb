#pragma once

#include "driftkit/activation_cache.hpp"
#include "driftkit/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace driftkit {

struct PerturbedText {
  std::string text;
  /// No applicable site was found; `text` is the unchanged response.
  bool inapplicable = false;
};

/// Rule-based corruptions of a response, one per strategy:
///  - entity swap: exchange two distinct capitalized multi-letter tokens;
///  - numerical corruption: change one digit of one digit-run;
///  - negation flip: drop the first negator, or insert "not" after the
///    first auxiliary verb;
///  - boundary violation: drop the final 25% of words and append an
///    out-of-domain clause.
/// Choices are seeded by (seed, prompt, response), so output is reproducible.
std::map<Perturbation, PerturbedText> perturbation_texts(std::string_view prompt, std::string_view response,
                                                         std::uint64_t seed = 42);

PerturbedText perturb(Perturbation strategy, std::string_view prompt, std::string_view response,
                      std::uint64_t seed = 42);

/// JSONL sidecar consumed by the extraction adapter: one
/// {"example_id", "strategy", "text", "inapplicable"} object per line.
void write_perturbation_sidecar(const Corpus& corpus, const std::filesystem::path& path, std::uint64_t seed = 42);

}  // namespace driftkit
