#include "driftkit/corpus.hpp"

#include "driftkit/error.hpp"
#include "driftkit/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <span>
#include <sstream>

namespace driftkit {

namespace {

using json = nlohmann::ordered_json;

std::string schema_prefix(std::size_t line) { return "line " + std::to_string(line) + ": "; }

std::optional<std::string> optional_text(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error(ErrorCode::SchemaError, schema_prefix(line) + key + " must be a string");
  return it->get<std::string>();
}

std::string required_text(const json& obj, const char* key, std::size_t line) {
  auto v = optional_text(obj, key, line);
  if (!v) throw Error(ErrorCode::SchemaError, schema_prefix(line) + "missing field " + key);
  return *v;
}

Example parse_example(const json& obj, std::size_t line) {
  if (!obj.is_object()) throw Error(ErrorCode::SchemaError, schema_prefix(line) + "expected a JSON object");
  Example ex;
  ex.example_id = required_text(obj, "example_id", line);
  ex.prompt = required_text(obj, "prompt", line);
  ex.response = required_text(obj, "response", line);
  ex.reference_text = optional_text(obj, "reference_text", line);
  ex.hallucinated_text = optional_text(obj, "hallucinated_text", line);
  ex.paired_correct_response = optional_text(obj, "paired_correct_response", line);
  ex.paired_hallucinated_response = optional_text(obj, "paired_hallucinated_response", line);

  auto label = obj.find("label");
  if (label == obj.end()) throw Error(ErrorCode::SchemaError, schema_prefix(line) + "missing field label");
  if (label->is_boolean()) {
    ex.label = label->get<bool>() ? 1 : 0;
  } else if (label->is_number_integer() || label->is_number_unsigned()) {
    const auto v = label->get<long long>();
    if (v != 0 && v != 1) throw Error(ErrorCode::SchemaError, schema_prefix(line) + "label must be 0 or 1");
    ex.label = static_cast<int>(v);
  } else {
    throw Error(ErrorCode::SchemaError, schema_prefix(line) + "label must be 0 or 1");
  }

  auto entropy = obj.find("entropy_target");
  if (entropy != obj.end() && !entropy->is_null()) {
    if (!entropy->is_number()) throw Error(ErrorCode::SchemaError, schema_prefix(line) + "entropy_target must be a number");
    const double h = entropy->get<double>();
    if (!(h >= 0.0) || !std::isfinite(h)) {
      throw Error(ErrorCode::SchemaError, schema_prefix(line) + "entropy_target must be finite and >= 0");
    }
    ex.entropy_target = h;
  }
  return ex;
}

void check_example(const Example& ex, CorpusFormat format, std::size_t line) {
  if (ex.label != 0 && ex.label != 1) throw Error(ErrorCode::SchemaError, schema_prefix(line) + "label must be 0 or 1");
  if (ex.entropy_target && !(*ex.entropy_target >= 0.0)) {
    throw Error(ErrorCode::SchemaError, schema_prefix(line) + "entropy_target must be >= 0");
  }
  if (format == CorpusFormat::TeacherForced && (!ex.reference_text || !ex.hallucinated_text)) {
    throw Error(ErrorCode::MissingPairedText,
                schema_prefix(line) + "teacher-forced example '" + ex.example_id +
                    "' needs reference_text and hallucinated_text");
  }
}

/// Largest-remainder apportionment of `total` seats over `sizes`.
std::vector<std::size_t> apportion(const std::vector<std::size_t>& sizes, std::size_t total) {
  const std::size_t n = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  std::vector<std::size_t> seats(sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    const double quota = static_cast<double>(sizes[c]) * static_cast<double>(total) / static_cast<double>(n);
    seats[c] = static_cast<std::size_t>(std::floor(quota + 1e-9));
    seats[c] = std::min(seats[c], sizes[c]);
    assigned += seats[c];
    remainders.emplace_back(quota - static_cast<double>(seats[c]), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first + 1e-12; });
  for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i) {
    const auto c = remainders[i].second;
    if (seats[c] < sizes[c]) {
      ++seats[c];
      ++assigned;
    }
  }
  return seats;
}

std::array<IndexList, 2> by_class(const IndexList& pool, const Labels& labels) {
  std::array<IndexList, 2> out;
  for (auto i : pool) {
    if (i >= labels.size()) throw Error(ErrorCode::InvalidArgument, "index beyond label vector");
    out[labels[i] == 1 ? 1 : 0].push_back(i);
  }
  return out;
}

}  // namespace

std::string to_string(CorpusFormat format) {
  return format == CorpusFormat::TeacherForced ? "tf" : "lg";
}

CorpusFormat corpus_format_from_string(const std::string& name) {
  if (name == "tf" || name == "TF" || name == "teacher_forced" || name == "TeacherForced") {
    return CorpusFormat::TeacherForced;
  }
  if (name == "lg" || name == "LG" || name == "live_generation" || name == "LiveGeneration") {
    return CorpusFormat::LiveGeneration;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown corpus format '" + name + "' (expected tf or lg)");
}

Labels Corpus::labels() const {
  Labels out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(ex.label);
  return out;
}

std::vector<std::string> Corpus::ids() const {
  std::vector<std::string> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(ex.example_id);
  return out;
}

LabelCounts count_labels(const std::vector<Example>& examples) {
  LabelCounts c;
  for (const auto& ex : examples) (ex.label == 1 ? c.positives : c.negatives)++;
  return c;
}

Corpus make_corpus(std::string name, CorpusFormat format, std::vector<Example> examples) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    check_example(examples[i], format, i + 1);
    if (!seen.insert(examples[i].example_id).second) {
      throw Error(ErrorCode::SchemaError, schema_prefix(i + 1) + "duplicate example_id '" + examples[i].example_id + "'");
    }
  }
  Corpus c;
  c.name = std::move(name);
  c.format = format;
  c.label_counts = count_labels(examples);
  c.examples = std::move(examples);
  return c;
}

Corpus parse_corpus(std::istream& in, CorpusFormat format, std::string name) {
  std::vector<Example> examples;
  std::set<std::string> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::SchemaError, schema_prefix(line) + "invalid JSON: " + e.what());
    }
    Example ex = parse_example(obj, line);
    check_example(ex, format, line);
    if (!seen.insert(ex.example_id).second) {
      throw Error(ErrorCode::SchemaError, schema_prefix(line) + "duplicate example_id '" + ex.example_id + "'");
    }
    examples.push_back(std::move(ex));
  }
  Corpus c;
  c.name = std::move(name);
  c.format = format;
  c.label_counts = count_labels(examples);
  c.examples = std::move(examples);
  return c;
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, std::string name) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open corpus '" + path.string() + "'");
  if (name.empty()) name = path.stem().string();
  return parse_corpus(in, format, std::move(name));
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  for (const auto& ex : corpus.examples) {
    json obj;
    obj["example_id"] = ex.example_id;
    obj["prompt"] = ex.prompt;
    obj["response"] = ex.response;
    if (ex.reference_text) obj["reference_text"] = *ex.reference_text;
    if (ex.hallucinated_text) obj["hallucinated_text"] = *ex.hallucinated_text;
    obj["label"] = ex.label;
    if (ex.entropy_target) obj["entropy_target"] = *ex.entropy_target;
    if (ex.paired_correct_response) obj["paired_correct_response"] = *ex.paired_correct_response;
    if (ex.paired_hallucinated_response) obj["paired_hallucinated_response"] = *ex.paired_hallucinated_response;
    out << obj.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

Split stratified_split(const Labels& labels, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "train_fraction must lie in (0, 1)");
  }
  IndexList all(labels.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto classes = by_class(all, labels);
  if (classes[0].empty() || classes[1].empty()) {
    throw Error(ErrorCode::SingleClass, "stratified split needs both labels present");
  }
  const auto total = static_cast<std::size_t>(std::llround(static_cast<double>(labels.size()) * spec.train_fraction));
  const auto seats = apportion({classes[0].size(), classes[1].size()}, total);

  Split out;
  for (std::size_t c = 0; c < 2; ++c) {
    Rng rng(spec.seed, 0x5117 + c);
    rng.shuffle(std::span<std::size_t>(classes[c]));
    out.train.insert(out.train.end(), classes[c].begin(), classes[c].begin() + static_cast<std::ptrdiff_t>(seats[c]));
    out.test.insert(out.test.end(), classes[c].begin() + static_cast<std::ptrdiff_t>(seats[c]), classes[c].end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

Split stratified_split(const Corpus& corpus, const SplitSpec& spec) { return stratified_split(corpus.labels(), spec); }

IndexList stratified_subsample(const IndexList& pool, const Labels& labels, std::size_t n_train, std::uint64_t seed) {
  auto classes = by_class(pool, labels);
  if (n_train >= pool.size()) {
    IndexList out = pool;
    std::sort(out.begin(), out.end());
    return out;
  }
  const auto seats = apportion({classes[0].size(), classes[1].size()}, n_train);
  IndexList out;
  for (std::size_t c = 0; c < 2; ++c) {
    std::sort(classes[c].begin(), classes[c].end());
    Rng rng(seed, 0xB0D6E7 + c);
    rng.shuffle(std::span<std::size_t>(classes[c]));
    out.insert(out.end(), classes[c].begin(), classes[c].begin() + static_cast<std::ptrdiff_t>(seats[c]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> stratified_folds(const IndexList& indices, const Labels& labels, std::size_t n_folds,
                                          std::uint64_t seed) {
  if (n_folds < 2) throw Error(ErrorCode::InvalidArgument, "n_folds must be >= 2");
  std::array<std::vector<std::size_t>, 2> positions;
  for (std::size_t p = 0; p < indices.size(); ++p) {
    if (indices[p] >= labels.size()) throw Error(ErrorCode::InvalidArgument, "index beyond label vector");
    positions[labels[indices[p]] == 1 ? 1 : 0].push_back(p);
  }
  for (std::size_t c = 0; c < 2; ++c) {
    if (positions[c].size() < n_folds) {
      std::ostringstream msg;
      msg << "class " << c << " has " << positions[c].size() << " examples, fewer than " << n_folds << " folds";
      throw Error(ErrorCode::TooFewPerClass, msg.str());
    }
  }
  std::vector<std::size_t> fold(indices.size());
  std::size_t deal = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    Rng rng(seed, 0xF01D + c);
    rng.shuffle(std::span<std::size_t>(positions[c]));
    for (auto p : positions[c]) fold[p] = deal++ % n_folds;
  }
  return fold;
}

std::pair<IndexList, IndexList> fold_partition(const IndexList& indices, const std::vector<std::size_t>& folds,
                                               std::size_t k) {
  std::pair<IndexList, IndexList> out;
  for (std::size_t p = 0; p < indices.size(); ++p) (folds[p] == k ? out.second : out.first).push_back(indices[p]);
  return out;
}

}  // namespace driftkit
