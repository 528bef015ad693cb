#include "driftkit/features.hpp"

#include "driftkit/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace driftkit {

namespace {

Vector row_as_double(const MatrixF& m, Eigen::Index row) { return m.row(row).transpose().cast<double>(); }

Vector flatten(const MatrixF& m) {
  // Row-major storage: taps concatenated in order.
  return Eigen::Map<const VectorF>(m.data(), m.size()).cast<double>();
}

const MatrixF& pooled_sample(const ActivationRecord& record, std::size_t sample) {
  if (sample >= record.pooled.size()) {
    throw Error(ErrorCode::InvalidArgument, "record '" + record.example_id + "' has no pooled sample " + std::to_string(sample));
  }
  return record.pooled[sample];
}

}  // namespace

std::string to_string(Recipe recipe) {
  switch (recipe) {
    case Recipe::Drift:
      return "drift";
    case Recipe::DriftConcat:
      return "drift_concat";
    case Recipe::Saplma:
      return "saplma";
    case Recipe::HalluShift:
      return "hallushift";
    case Recipe::ActVariance:
      return "act_variance";
    case Recipe::PerturbDelta:
      return "perturb_delta";
    case Recipe::AnswerExpect:
      return "answer_expect";
    case Recipe::LogProbStats:
      return "logprob_stats";
    case Recipe::CaaScore:
      return "caa_score";
  }
  return "unknown";
}

Recipe recipe_from_string(const std::string& name) {
  for (auto r : {Recipe::Drift, Recipe::DriftConcat, Recipe::Saplma, Recipe::HalluShift, Recipe::ActVariance,
                 Recipe::PerturbDelta, Recipe::AnswerExpect, Recipe::LogProbStats, Recipe::CaaScore}) {
    if (to_string(r) == name) return r;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown feature recipe '" + name + "'");
}

std::size_t recipe_dim(Recipe recipe, std::size_t taps, std::size_t hidden_dim, std::size_t strategies) {
  switch (recipe) {
    case Recipe::Drift:
      return pair_count(taps) * (hidden_dim + 2);
    case Recipe::DriftConcat:
    case Recipe::ActVariance:
      return taps * hidden_dim;
    case Recipe::Saplma:
      return hidden_dim;
    case Recipe::HalluShift:
    case Recipe::CaaScore:
      return 1;
    case Recipe::PerturbDelta:
      return strategies * taps * hidden_dim;
    case Recipe::AnswerExpect:
      return taps * hidden_dim + 2;
    case Recipe::LogProbStats:
      return 5;
  }
  return 0;
}

double cosine_or_zero(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b, bool* degenerate) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

Vector drift_features(const MatrixF& pooled, bool* degenerate) {
  const auto taps = static_cast<std::size_t>(pooled.rows());
  if (taps < 2) throw Error(ErrorCode::SingleTap, "DRIFT needs at least two taps");
  const auto d = static_cast<std::size_t>(pooled.cols());
  Vector z(static_cast<Eigen::Index>(recipe_dim(Recipe::Drift, taps, d)));
  Eigen::Index offset = 0;
  const auto dd = static_cast<Eigen::Index>(d);
  for (std::size_t a = 0; a < taps; ++a) {
    const Vector ha = row_as_double(pooled, static_cast<Eigen::Index>(a));
    for (std::size_t b = a + 1; b < taps; ++b) {
      const Vector hb = row_as_double(pooled, static_cast<Eigen::Index>(b));
      const Vector diff = hb - ha;
      z.segment(offset, dd) = diff;
      z[offset + dd] = cosine_or_zero(ha, hb, degenerate);
      z[offset + dd + 1] = diff.norm();
      offset += dd + 2;
    }
  }
  return z;
}

Vector drift_features(const ActivationRecord& record, std::size_t sample, bool* degenerate) {
  return drift_features(pooled_sample(record, sample), degenerate);
}

Vector drift_concat_features(const ActivationRecord& record, std::span<const std::size_t> tap_positions) {
  const MatrixF& pooled = pooled_sample(record, 0);
  std::vector<std::size_t> positions(tap_positions.begin(), tap_positions.end());
  if (positions.empty()) {
    if (pooled.rows() < 3) throw Error(ErrorCode::TooFewTaps, "DRIFT-concat needs three taps");
    positions = {0, 1, 2};
  }
  const auto d = pooled.cols();
  Vector out(static_cast<Eigen::Index>(positions.size()) * d);
  for (std::size_t k = 0; k < positions.size(); ++k) {
    if (positions[k] >= static_cast<std::size_t>(pooled.rows())) {
      throw Error(ErrorCode::TooFewTaps, "tap position " + std::to_string(positions[k]) + " not in cache");
    }
    out.segment(static_cast<Eigen::Index>(k) * d, d) = row_as_double(pooled, static_cast<Eigen::Index>(positions[k]));
  }
  return out;
}

Vector saplma_features(const ActivationRecord& record, std::size_t tap_position) {
  if (!record.last_token) {
    throw Error(ErrorCode::MissingLastToken, "record '" + record.example_id + "' has no last-token state");
  }
  if (tap_position >= static_cast<std::size_t>(record.last_token->rows())) {
    throw Error(ErrorCode::MissingTap, "tap position " + std::to_string(tap_position) + " not in cache");
  }
  return row_as_double(*record.last_token, static_cast<Eigen::Index>(tap_position));
}

double hallushift_score(const ActivationRecord& record, const LayerTapSpec& taps) {
  const auto lo = taps.position_of(0.60);
  const auto hi = taps.position_of(0.85);
  if (!lo || !hi) throw Error(ErrorCode::MissingTap, "HalluShift needs the 0.60 and 0.85 taps");
  const MatrixF& pooled = pooled_sample(record, 0);
  if (*hi >= static_cast<std::size_t>(pooled.rows())) throw Error(ErrorCode::MissingTap, "tap spec exceeds cache taps");
  return 1.0 - cosine_or_zero(row_as_double(pooled, static_cast<Eigen::Index>(*lo)),
                              row_as_double(pooled, static_cast<Eigen::Index>(*hi)));
}

Vector variance_features(const ActivationRecord& record) {
  const std::size_t s = record.pooled.size();
  if (s < 2) throw Error(ErrorCode::TooFewSamples, "variance features need at least two sampled completions");
  Vector mean = Vector::Zero(record.pooled.front().size());
  for (const auto& m : record.pooled) mean += flatten(m);
  mean /= static_cast<double>(s);
  Vector var = Vector::Zero(mean.size());
  for (const auto& m : record.pooled) var += (flatten(m) - mean).array().square().matrix();
  return var / static_cast<double>(s);
}

Vector flat_pooled(const ActivationRecord& record, std::size_t sample) { return flatten(pooled_sample(record, sample)); }

CaaDirection caa_direction(std::span<const ActivationRecord* const> train_records) {
  if (train_records.empty()) throw Error(ErrorCode::MissingPairs, "CAA direction needs at least one paired example");
  CaaDirection out;
  double diff_norm_sum = 0.0;
  for (const ActivationRecord* rec : train_records) {
    if (!rec->paired_correct || !rec->paired_hallucinated) {
      throw Error(ErrorCode::MissingPairs, "record '" + rec->example_id + "' lacks paired correct/hallucinated states");
    }
    const Vector diff = flatten(*rec->paired_correct) - flatten(*rec->paired_hallucinated);
    if (out.direction.size() == 0) out.direction = Vector::Zero(diff.size());
    out.direction += diff;
    diff_norm_sum += diff.norm();
  }
  const double n = static_cast<double>(train_records.size());
  out.direction /= n;
  const double scale = std::max(1.0, diff_norm_sum / n);
  out.degenerate = out.direction.norm() <= 1e-12 * scale;
  return out;
}

double caa_score(const ActivationRecord& record, const CaaDirection& direction) {
  if (direction.degenerate) throw Error(ErrorCode::DegenerateDirection, "CAA direction cancelled to zero");
  return cosine_or_zero(flat_pooled(record), direction.direction);
}

Matrix perturb_delta_features(const ActivationRecord& record, std::span<const Perturbation> strategies) {
  if (record.perturbed_pooled.empty()) {
    throw Error(ErrorCode::MissingPerturbedStates, "record '" + record.example_id + "' has no perturbed states");
  }
  std::vector<Perturbation> chosen(strategies.begin(), strategies.end());
  if (chosen.empty()) {
    for (const auto& [p, m] : record.perturbed_pooled) chosen.push_back(p);
  }
  const Vector base = flat_pooled(record);
  Matrix out(static_cast<Eigen::Index>(chosen.size()), base.size());
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    auto it = record.perturbed_pooled.find(chosen[k]);
    if (it == record.perturbed_pooled.end()) {
      throw Error(ErrorCode::MissingPerturbedStates,
                  "record '" + record.example_id + "' has no " + to_string(chosen[k]) + " states");
    }
    out.row(static_cast<Eigen::Index>(k)) = (base - flatten(it->second)).transpose();
  }
  return out;
}

Vector answer_expect_features(const ActivationRecord& record, bool* degenerate) {
  if (!record.before_state || !record.after_state) {
    throw Error(ErrorCode::MissingBeforeAfter, "record '" + record.example_id + "' has no before/after states");
  }
  const Vector before = record.before_state->cast<double>();
  const Vector after = record.after_state->cast<double>();
  const Eigen::Index d = before.size();
  Vector out(d + 2);
  out.head(d) = after - before;
  out[d] = cosine_or_zero(before, after, degenerate);
  out[d + 1] = (before - after).norm();
  return out;
}

Vector logprob_stats(std::span<const double> lp) {
  if (lp.empty()) throw Error(ErrorCode::EmptySequence, "log-prob statistics need at least one token");
  const double n = static_cast<double>(lp.size());
  const double mean = std::accumulate(lp.begin(), lp.end(), 0.0) / n;
  double min = lp[0], var = 0.0;
  for (double x : lp) {
    min = std::min(min, x);
    var += (x - mean) * (x - mean);
  }
  var /= n;
  double slope = 0.0;
  if (lp.size() > 1) {
    const double x_mean = (n - 1.0) / 2.0;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t t = 0; t < lp.size(); ++t) {
      const double dx = static_cast<double>(t) - x_mean;
      sxy += dx * (lp[t] - mean);
      sxx += dx * dx;
    }
    slope = sxy / sxx;
  }
  Vector out(5);
  out << mean, min, var, slope, -mean;
  return out;
}

Vector logprob_stats(const ActivationRecord& record) {
  if (!record.token_logprobs) {
    throw Error(ErrorCode::EmptySequence, "record '" + record.example_id + "' carries no token log-probs");
  }
  std::vector<double> lp(record.token_logprobs->begin(), record.token_logprobs->end());
  return logprob_stats(lp);
}

FeatureMatrix build_features(Recipe recipe, std::span<const ActivationRecord> records, const RecipeOptions& options) {
  FeatureMatrix fm;
  fm.recipe = recipe;
  fm.example_ids.reserve(records.size());
  if (records.empty()) return fm;

  auto row_for = [&](const ActivationRecord& rec, bool* degenerate) -> Vector {
    switch (recipe) {
      case Recipe::Drift:
        return drift_features(rec, 0, degenerate);
      case Recipe::DriftConcat:
        return drift_concat_features(rec, options.tap_positions);
      case Recipe::Saplma: {
        const std::size_t tap = options.tap_positions.empty() ? static_cast<std::size_t>(rec.pooled.front().rows()) - 1
                                                              : options.tap_positions.front();
        return saplma_features(rec, tap);
      }
      case Recipe::HalluShift: {
        if (!options.taps) throw Error(ErrorCode::MissingTap, "HalluShift needs the tap specification");
        Vector v(1);
        v[0] = hallushift_score(rec, *options.taps);
        return v;
      }
      case Recipe::ActVariance:
        return variance_features(rec);
      case Recipe::PerturbDelta: {
        const Matrix rows = perturb_delta_features(rec, options.strategies);
        return Eigen::Map<const Vector>(rows.data(), rows.size());
      }
      case Recipe::AnswerExpect:
        return answer_expect_features(rec, degenerate);
      case Recipe::LogProbStats:
        return logprob_stats(rec);
      case Recipe::CaaScore: {
        if (!options.caa) throw Error(ErrorCode::MissingPairs, "CAA scores need a fitted direction");
        Vector v(1);
        v[0] = caa_score(rec, *options.caa);
        return v;
      }
    }
    throw Error(ErrorCode::InvalidArgument, "unhandled recipe");
  };

  for (std::size_t i = 0; i < records.size(); ++i) {
    bool degenerate = false;
    const Vector row = row_for(records[i], &degenerate);
    if (i == 0) fm.data.resize(static_cast<Eigen::Index>(records.size()), row.size());
    if (row.size() != fm.data.cols()) {
      throw Error(ErrorCode::DimMismatch, "record '" + records[i].example_id + "' yields a different feature width");
    }
    if (!row.allFinite()) {
      throw Error(ErrorCode::NanDetected, "non-finite " + to_string(recipe) + " features for '" + records[i].example_id + "'");
    }
    fm.data.row(static_cast<Eigen::Index>(i)) = row.transpose();
    fm.example_ids.push_back(records[i].example_id);
    fm.degenerate_cosines += degenerate;
  }
  return fm;
}

}  // namespace driftkit
