#include "driftkit/synthetic.hpp"

#include "driftkit/error.hpp"
#include "driftkit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace driftkit {

namespace {

constexpr std::size_t kTokens = 8;
constexpr std::size_t kTextWords = 12;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::vector<std::string> make_vocabulary(Rng& rng, std::size_t n) {
  static const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st"};
  static const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
  std::set<std::string> seen;
  std::vector<std::string> out;
  while (out.size() < n) {
    std::string w;
    const auto syllables = 2 + rng.below(2);
    for (std::uint64_t s = 0; s < syllables; ++s) {
      w += kOnsets[rng.below(std::size(kOnsets))];
      w += kVowels[rng.below(std::size(kVowels))];
    }
    if (seen.insert(w).second) out.push_back(w);
  }
  return out;
}

std::vector<std::string> draw_words(Rng& rng, const std::vector<std::string>& vocab, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(vocab[rng.below(vocab.size())]);
  return out;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

double overlap(const std::vector<std::string>& response, const std::vector<std::string>& reference) {
  const std::set<std::string> ref(reference.begin(), reference.end());
  std::size_t hit = 0;
  for (const auto& w : response) hit += ref.count(w);
  return static_cast<double>(hit) / static_cast<double>(response.size());
}

Vector gaussian(Rng& rng, std::size_t d, double sd = 1.0) {
  Vector v(static_cast<Eigen::Index>(d));
  for (auto& x : v) x = sd * rng.normal();
  return v;
}

MatrixF to_float(const Matrix& m) { return m.cast<float>(); }

double bayes_auroc_mc(double label_noise, std::uint64_t seed) {
  constexpr std::size_t kDraws = 200000;
  Rng rng(seed, 0xBA7E5);
  std::vector<double> s(kDraws);
  Labels y(kDraws);
  for (std::size_t i = 0; i < kDraws; ++i) {
    s[i] = rng.normal();
    y[i] = s[i] + label_noise * rng.normal() > 0.0;
  }
  return auroc(s, y);
}

}  // namespace

double gaussian_auroc(double delta) { return normal_cdf(delta / std::sqrt(2.0)); }

double gaussian_delta_for_auroc(double a) {
  if (!(a > 0.0 && a < 1.0)) throw Error(ErrorCode::InvalidArgument, "AUROC must lie in (0, 1)");
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (gaussian_auroc(mid) < a ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ScoredSet gaussian_scored_set(std::size_t n_pos, std::size_t n_neg, double delta, std::uint64_t seed) {
  Rng rng(seed, 0x6A55);
  ScoredSet set;
  set.scores.reserve(n_pos + n_neg);
  for (std::size_t i = 0; i < n_pos; ++i) {
    set.scores.push_back(delta + rng.normal());
    set.labels.push_back(1);
  }
  for (std::size_t i = 0; i < n_neg; ++i) {
    set.scores.push_back(rng.normal());
    set.labels.push_back(0);
  }
  return set;
}

Vector random_unit_vector(std::size_t d, std::uint64_t seed) {
  Rng rng(seed, 0xD12EC7);
  Vector v = gaussian(rng, d);
  return v / v.norm();
}

SyntheticData make_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 10) throw Error(ErrorCode::InvalidArgument, "synthetic corpus needs at least 10 examples");
  if (spec.hidden_dim < 2) throw Error(ErrorCode::InvalidArgument, "hidden_dim must be at least 2");
  if (spec.samples < 1) throw Error(ErrorCode::InvalidArgument, "samples must be at least 1");

  SyntheticData data;
  data.taps = resolve_taps(spec.tap_fractions, spec.total_layers);
  const std::size_t taps = data.taps.size();
  const std::size_t d = spec.hidden_dim;
  if (spec.signal_from >= taps || spec.signal_to >= taps) {
    throw Error(ErrorCode::InvalidArgument, "signal tap position out of range");
  }
  data.direction = spec.direction ? *spec.direction : random_unit_vector(d, spec.seed);
  if (static_cast<std::size_t>(data.direction.size()) != d) {
    throw Error(ErrorCode::DimMismatch, "planted direction has the wrong width");
  }
  const Vector& u = data.direction;
  // Leak direction: orthogonal to u so text leakage and the planted signal
  // stay separable.
  Vector v = random_unit_vector(d, spec.seed ^ 0x1EA4ULL);
  v -= v.dot(u) * u;
  v.normalize();

  const bool tf = spec.format == CorpusFormat::TeacherForced;
  Rng rng(spec.seed, 0x5E7);
  Rng text_rng(spec.seed, 0x7E47);
  const auto vocab = make_vocabulary(text_rng, 400);

  std::vector<Example> examples;
  examples.reserve(spec.n);
  data.records.reserve(spec.n);
  const double noise_sd = spec.label_noise * std::sqrt(2.0);
  for (std::size_t i = 0; i < spec.n; ++i) {
    Example ex;
    char id[32];
    std::snprintf(id, sizeof id, "%s-%05zu", spec.name.c_str(), i);
    ex.example_id = id;

    // Residual stream: shared base plus per-tap innovations.
    const Vector base = gaussian(rng, d);
    std::vector<Vector> states(taps);
    for (auto& s : states) s = base + gaussian(rng, d);

    double oracle = 0.0;
    int label = 0;
    switch (spec.signal) {
      case SignalKind::Drift:
        oracle = u.dot(states[spec.signal_to] - states[spec.signal_from]);
        label = oracle + noise_sd * rng.normal() > 0.0;
        break;
      case SignalKind::SingleTap:
        oracle = u.dot(states[spec.signal_to]);
        label = oracle + noise_sd * rng.normal() > 0.0;
        break;
      case SignalKind::None:
        oracle = rng.uniform();
        label = rng.uniform() < 0.5;
        break;
    }
    ex.label = label;
    data.oracle_scores.push_back(oracle);

    // Text.
    const auto reference = draw_words(text_rng, vocab, kTextWords);
    std::vector<std::string> response;
    if (tf) {
      if (label == 0) {
        response = reference;
        for (int k = 0; k < 2; ++k) response[text_rng.below(kTextWords)] = vocab[text_rng.below(vocab.size())];
      } else {
        response = draw_words(text_rng, vocab, kTextWords);
      }
    } else {
      // Half the words come from the reference regardless of the label.
      response = draw_words(text_rng, vocab, kTextWords);
      for (std::size_t k = 0; k < kTextWords / 2; ++k) response[k] = reference[text_rng.below(kTextWords)];
      text_rng.shuffle(std::span<std::string>(response));
    }
    ex.reference_text = join(reference);
    ex.response = join(response);
    const std::string topic = vocab[text_rng.below(vocab.size())];
    if (tf) {
      ex.prompt = "Context: " + *ex.reference_text + "\nQuestion: what about " + topic + "?\nAnswer: " + ex.response;
      ex.hallucinated_text = join(draw_words(text_rng, vocab, kTextWords));
      ex.paired_correct_response = *ex.reference_text;
      ex.paired_hallucinated_response = *ex.hallucinated_text;
    } else {
      ex.prompt = "Question: what about " + topic + "?";
    }
    ex.entropy_target = std::clamp(0.4 + 0.2 * label + 0.1 * rng.normal(), 0.0, 1.0);

    // Lexical shortcut: only teacher-forced states see the answer overlap.
    const double leak = tf ? spec.text_leak * (overlap(response, reference) - 0.5) : 0.0;

    ActivationRecord rec;
    rec.example_id = ex.example_id;
    rec.token_count = kTokens;
    Matrix clean(static_cast<Eigen::Index>(taps), static_cast<Eigen::Index>(d));
    for (std::size_t l = 0; l < taps; ++l) clean.row(static_cast<Eigen::Index>(l)) = states[l] + leak * v;
    const double spread = 0.1 * (1.0 + spec.variance_signal * label);
    for (std::size_t s = 0; s < spec.samples; ++s) {
      Matrix m = clean;
      if (s > 0) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r) += gaussian(rng, d, spread).transpose();
      }
      rec.pooled.push_back(to_float(m));
    }
    Matrix last(static_cast<Eigen::Index>(taps), static_cast<Eigen::Index>(d));
    for (Eigen::Index r = 0; r < last.rows(); ++r) last.row(r) = gaussian(rng, d).transpose();
    rec.last_token = to_float(last);

    Vector before = gaussian(rng, taps * d);
    Vector after = before + gaussian(rng, taps * d, 0.5);
    for (std::size_t l = 0; l < taps; ++l) after.segment(static_cast<Eigen::Index>(l * d), static_cast<Eigen::Index>(d)) += leak * v;
    rec.before_state = before.cast<float>();
    rec.after_state = after.cast<float>();

    for (auto p : kAllPerturbations) {
      Matrix m = clean;
      for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r) += (gaussian(rng, d, 0.3) - leak * v).transpose();
      rec.perturbed_pooled.emplace(p, to_float(m));
    }
    if (tf) {
      Matrix c(static_cast<Eigen::Index>(taps), static_cast<Eigen::Index>(d));
      Matrix h(static_cast<Eigen::Index>(taps), static_cast<Eigen::Index>(d));
      for (std::size_t l = 0; l < taps; ++l) {
        const Vector pb = gaussian(rng, d);
        c.row(static_cast<Eigen::Index>(l)) = pb + 0.5 * v + gaussian(rng, d, 0.3);
        h.row(static_cast<Eigen::Index>(l)) = pb - 0.5 * v + gaussian(rng, d, 0.3);
      }
      rec.paired_correct = to_float(c);
      rec.paired_hallucinated = to_float(h);
    }
    std::vector<float> lp(kTokens);
    for (auto& x : lp) x = static_cast<float>(-1.0 - spec.logprob_signal * label + 0.5 * rng.normal());
    rec.token_logprobs = std::move(lp);

    examples.push_back(std::move(ex));
    data.records.push_back(std::move(rec));
  }
  data.corpus = make_corpus(spec.name, spec.format, std::move(examples));
  data.header = header_for(data.records, spec.total_layers, data.taps.resolved_indices);
  data.bayes_auroc = spec.signal == SignalKind::None ? 0.5 : bayes_auroc_mc(spec.label_noise, spec.seed);
  return data;
}

SyntheticFiles write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  SyntheticFiles files{dir / (data.corpus.name + ".jsonl"), dir / (data.corpus.name + ".cache")};
  write_corpus(data.corpus, files.corpus);
  write_cache(data.records, data.header, files.cache);
  return files;
}

}  // namespace driftkit
