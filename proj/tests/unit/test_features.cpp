#include "driftkit/feature_io.hpp"
#include "driftkit/features.hpp"

#include "support.hpp"

#include <cmath>

using namespace driftkit;
using namespace testing_support;

namespace {

ActivationRecord record_from(const std::vector<std::vector<float>>& rows) {
  ActivationRecord r;
  r.example_id = "x";
  MatrixF m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  r.pooled.push_back(m);
  return r;
}

double dot(const Vector& a, const Vector& b) { return a.dot(b); }

}  // namespace

TEST(Drift, PaperDimension) {
  EXPECT_EQ(recipe_dim(Recipe::Drift, 4, 8192), 49164u);
  EXPECT_EQ(pair_count(4), 6u);
}

TEST(Drift, DimensionProperty) {
  Rng rng(1);
  for (int t = 0; t < 40; ++t) {
    const std::size_t taps = 2 + rng.below(5), d = 1 + rng.below(20);
    const auto rec = random_record("r", taps, d, 1, rng);
    EXPECT_EQ(static_cast<std::size_t>(drift_features(rec).size()), pair_count(taps) * (d + 2));
    EXPECT_EQ(recipe_dim(Recipe::Drift, taps, d), pair_count(taps) * (d + 2));
  }
}

TEST(Drift, IdenticalStates) {
  const auto rec = record_from({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
  const Vector z = drift_features(rec);
  for (std::size_t k = 0; k < 3; ++k) {
    for (int j = 0; j < 3; ++j) EXPECT_EQ(z(static_cast<Eigen::Index>(k * 5 + j)), 0.0);
    EXPECT_NEAR(z(static_cast<Eigen::Index>(k * 5 + 3)), 1.0, 1e-12);
    EXPECT_EQ(z(static_cast<Eigen::Index>(k * 5 + 4)), 0.0);
  }
}

TEST(Drift, TwoTapOracle) {
  Rng rng(2);
  const auto rec = random_record("r", 2, 3, 1, rng);
  const Vector a = rec.pooled[0].row(0).transpose().cast<double>();
  const Vector b = rec.pooled[0].row(1).transpose().cast<double>();
  const Vector z = drift_features(rec);
  ASSERT_EQ(z.size(), 5);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(z(j), b(j) - a(j), 1e-12);
  EXPECT_NEAR(z(3), dot(a, b) / (a.norm() * b.norm()), 1e-12);
  EXPECT_NEAR(z(4), (b - a).norm(), 1e-12);
}

TEST(Drift, LexicographicPairOrder) {
  const auto rec = record_from({{1, 0}, {0, 2}, {3, 0}});
  const Vector z = drift_features(rec);
  // pairs (0,1), (0,2), (1,2): difference blocks
  EXPECT_EQ(z(0), -1);
  EXPECT_EQ(z(1), 2);
  EXPECT_EQ(z(4), 2);
  EXPECT_EQ(z(5), 0);
  EXPECT_EQ(z(8), 3);
  EXPECT_EQ(z(9), -2);
}

TEST(Drift, TranslationAndScaleProperties) {
  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    const auto rec = random_record("r", 2, 6, 1, rng);
    const Vector base = drift_features(rec);
    auto shifted = rec;
    const auto shift = random_matrix(1, 6, rng);
    for (int r = 0; r < 2; ++r) shifted.pooled[0].row(r) += shift.row(0);
    const Vector zs = drift_features(shifted);
    EXPECT_LT((zs.head(6) - base.head(6)).cwiseAbs().maxCoeff(), 1e-5);
    auto scaled = rec;
    const float c = 0.5f + 2.0f * static_cast<float>(rng.uniform());
    scaled.pooled[0] *= c;
    const Vector zc = drift_features(scaled);
    EXPECT_NEAR(zc(6), base(6), 1e-6);
    EXPECT_NEAR(zc(7), c * base(7), 1e-5 * std::max(1.0, base(7)));
  }
}

TEST(Drift, ZeroVectorCosineIsZeroAndFlagged) {
  const auto rec = record_from({{0, 0}, {1, 1}});
  bool degenerate = false;
  const Vector z = drift_features(rec, 0, &degenerate);
  EXPECT_EQ(z(2), 0.0);
  EXPECT_TRUE(degenerate);
}

TEST(Drift, SingleTap) {
  const auto rec = record_from({{1, 2}});
  EXPECT_EQ(error_code_of([&] { drift_features(rec); }), ErrorCode::SingleTap);
}

TEST(DriftConcat, LengthAndOrder) {
  Rng rng(4);
  const auto rec = random_record("r", 4, 4, 1, rng);
  const Vector v = drift_concat_features(rec);
  EXPECT_EQ(v.size(), 12);
  const std::vector<std::size_t> order = {2, 1, 0};
  EXPECT_NE(drift_concat_features(rec, order), v);
  EXPECT_EQ(recipe_dim(Recipe::DriftConcat, 3, 8192), 24576u);
  for (int j = 0; j < 4; ++j) EXPECT_EQ(v(4 + j), rec.pooled[0](1, j));
}

TEST(DriftConcat, TooFewTaps) {
  Rng rng(4);
  const auto rec = random_record("r", 2, 4, 1, rng);
  EXPECT_EQ(error_code_of([&] { drift_concat_features(rec); }), ErrorCode::TooFewTaps);
}

TEST(Saplma, IdentityAndMissing) {
  Rng rng(5);
  auto rec = random_record("r", 3, 4, 1, rng);
  EXPECT_EQ(error_code_of([&] { saplma_features(rec, 1); }), ErrorCode::MissingLastToken);
  rec.last_token = random_matrix(3, 4, rng);
  const Vector v = saplma_features(rec, 2);
  for (int j = 0; j < 4; ++j) EXPECT_EQ(v(j), (*rec.last_token)(2, j));
}

TEST(HalluShift, IdenticalOppositeAndOracle) {
  const auto taps = resolve_taps(kDefaultTapFractions, 20);
  EXPECT_NEAR(hallushift_score(record_from({{1, 2}, {5, 5}, {5, 5}, {1, 2}}), taps), 0.0, 1e-12);
  EXPECT_NEAR(hallushift_score(record_from({{1, 2}, {5, 5}, {5, 5}, {-1, -2}}), taps), 2.0, 1e-12);
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const auto rec = random_record("r", 4, 7, 1, rng);
    const Vector a = rec.pooled[0].row(0).transpose().cast<double>();
    const Vector b = rec.pooled[0].row(3).transpose().cast<double>();
    const double s = hallushift_score(rec, taps);
    EXPECT_NEAR(s, 1 - a.dot(b) / (a.norm() * b.norm()), 1e-12);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 2.0);
  }
}

TEST(HalluShift, MissingTap) {
  const auto taps = resolve_taps({0.6, 0.7}, 20);
  EXPECT_EQ(error_code_of([&] { hallushift_score(record_from({{1, 2}, {3, 4}}), taps); }), ErrorCode::MissingTap);
}

TEST(Variance, Conventions) {
  ActivationRecord r = record_from({{1, 2}, {3, 4}});
  r.pooled.push_back(r.pooled[0]);
  EXPECT_EQ(variance_features(r), Vector::Zero(4));
  r.pooled[1] = -r.pooled[0];
  const Vector v = variance_features(r);
  EXPECT_NEAR(v(0), 1.0, 1e-12);
  EXPECT_NEAR(v(3), 16.0, 1e-12);
  r.pooled.pop_back();
  EXPECT_EQ(error_code_of([&] { variance_features(r); }), ErrorCode::TooFewSamples);
}

TEST(Variance, TwoPassOracle) {
  Rng rng(7);
  const auto rec = random_record("r", 3, 5, 10, rng);
  const Vector v = variance_features(rec);
  for (int l = 0; l < 3; ++l)
    for (int j = 0; j < 5; ++j) {
      double mean = 0;
      for (const auto& s : rec.pooled) mean += s(l, j);
      mean /= 10;
      double var = 0;
      for (const auto& s : rec.pooled) var += (s(l, j) - mean) * (s(l, j) - mean);
      EXPECT_NEAR(v(l * 5 + j), var / 10, 1e-10);
      EXPECT_GE(v(l * 5 + j), 0.0);
    }
}

TEST(Caa, SinglePairIsDifference) {
  Rng rng(8);
  auto rec = random_record("r", 2, 3, 1, rng);
  rec.paired_correct = random_matrix(2, 3, rng);
  rec.paired_hallucinated = random_matrix(2, 3, rng);
  const ActivationRecord* ptr = &rec;
  const auto dir = caa_direction(std::span(&ptr, 1));
  const MatrixF diff = *rec.paired_correct - *rec.paired_hallucinated;
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(dir.direction(i), diff.data()[i], 1e-6);
  EXPECT_FALSE(dir.degenerate);
}

TEST(Caa, CancellingPairsDegenerate) {
  Rng rng(9);
  auto a = random_record("a", 2, 3, 1, rng);
  a.paired_correct = random_matrix(2, 3, rng);
  a.paired_hallucinated = random_matrix(2, 3, rng);
  auto b = a;
  std::swap(*b.paired_correct, *b.paired_hallucinated);
  std::vector<const ActivationRecord*> recs = {&a, &b};
  const auto dir = caa_direction(recs);
  EXPECT_TRUE(dir.degenerate);
  EXPECT_EQ(error_code_of([&] { caa_score(a, dir); }), ErrorCode::DegenerateDirection);
}

TEST(Caa, MeanDifferenceOracleAndScore) {
  Rng rng(10);
  std::vector<ActivationRecord> recs;
  for (int i = 0; i < 5; ++i) {
    auto r = random_record("r" + std::to_string(i), 2, 4, 1, rng);
    r.paired_correct = random_matrix(2, 4, rng);
    r.paired_hallucinated = random_matrix(2, 4, rng);
    recs.push_back(r);
  }
  std::vector<const ActivationRecord*> ptrs;
  for (const auto& r : recs) ptrs.push_back(&r);
  const auto dir = caa_direction(ptrs);
  Vector expect = Vector::Zero(8);
  for (const auto& r : recs)
    for (int i = 0; i < 8; ++i) expect(i) += (static_cast<double>(r.paired_correct->data()[i]) - r.paired_hallucinated->data()[i]) / 5;
  EXPECT_LT((dir.direction - expect).cwiseAbs().maxCoeff(), 1e-12);
  const Vector h = flat_pooled(recs[0]);
  EXPECT_NEAR(caa_score(recs[0], dir), h.dot(expect) / (h.norm() * expect.norm()), 1e-12);
  recs[3].paired_hallucinated.reset();
  EXPECT_EQ(error_code_of([&] { caa_direction(ptrs); }), ErrorCode::MissingPairs);
}

TEST(PerturbDelta, RowsAndZeros) {
  Rng rng(11);
  auto rec = random_record("r", 2, 3, 1, rng);
  EXPECT_EQ(error_code_of([&] { perturb_delta_features(rec); }), ErrorCode::MissingPerturbedStates);
  for (auto p : kAllPerturbations) rec.perturbed_pooled[p] = rec.pooled[0];
  const Matrix all = perturb_delta_features(rec);
  EXPECT_EQ(all.rows(), 4);
  EXPECT_EQ(all.cols(), 6);
  EXPECT_EQ(all.cwiseAbs().maxCoeff(), 0.0);
  const std::vector<Perturbation> one = {Perturbation::NegationFlip};
  rec.perturbed_pooled[Perturbation::NegationFlip] = random_matrix(2, 3, rng);
  const Matrix single = perturb_delta_features(rec, one);
  ASSERT_EQ(single.rows(), 1);
  EXPECT_NEAR(single(0, 4), static_cast<double>(rec.pooled[0](1, 1)) - rec.perturbed_pooled[Perturbation::NegationFlip](1, 1), 1e-12);
}

TEST(AnswerExpect, Conventions) {
  ActivationRecord r;
  r.before_state = VectorF::Ones(3);
  r.after_state = VectorF::Ones(3);
  Vector v = answer_expect_features(r);
  EXPECT_EQ(v.size(), 5);
  EXPECT_EQ(v.head(3), Vector::Zero(3));
  EXPECT_NEAR(v(3), 1.0, 1e-12);
  EXPECT_EQ(v(4), 0.0);
  r.before_state = VectorF::Unit(3, 0);
  r.after_state = VectorF::Unit(3, 1);
  v = answer_expect_features(r);
  EXPECT_NEAR(v(3), 0.0, 1e-12);
  EXPECT_NEAR(v(4), std::sqrt(2.0), 1e-12);
  r.after_state.reset();
  EXPECT_EQ(error_code_of([&] { answer_expect_features(r); }), ErrorCode::MissingBeforeAfter);
}

TEST(AnswerExpect, FormulaOracle) {
  Rng rng(12);
  ActivationRecord r;
  r.before_state = random_matrix(1, 6, rng).row(0).transpose();
  r.after_state = random_matrix(1, 6, rng).row(0).transpose();
  const Vector a = r.before_state->cast<double>(), b = r.after_state->cast<double>();
  const Vector v = answer_expect_features(r);
  EXPECT_LT((v.head(6) - (b - a)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(v(6), a.dot(b) / (a.norm() * b.norm()), 1e-12);
  EXPECT_NEAR(v(7), (a - b).norm(), 1e-12);
}

TEST(LogprobStats, Examples) {
  const std::vector<double> c = {-0.7, -0.7, -0.7};
  const Vector s = logprob_stats(c);
  EXPECT_NEAR(s(0), -0.7, 1e-15);
  EXPECT_NEAR(s(1), -0.7, 1e-15);
  EXPECT_NEAR(s(2), 0.0, 1e-15);
  EXPECT_NEAR(s(3), 0.0, 1e-15);
  EXPECT_NEAR(s(4), 0.7, 1e-15);

  const std::vector<double> seq = {-1, -2, -3};
  const Vector t = logprob_stats(seq);
  EXPECT_NEAR(t(0), -2.0, 1e-15);
  EXPECT_EQ(t(1), -3.0);
  EXPECT_NEAR(t(2), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(t(3), -1.0, 1e-15);
  EXPECT_NEAR(t(4), 2.0, 1e-15);

  const std::vector<double> one = {-4.0};
  EXPECT_EQ(logprob_stats(one)(3), 0.0);
  EXPECT_EQ(error_code_of([] { logprob_stats(std::span<const double>{}); }), ErrorCode::EmptySequence);
}

TEST(LogprobStats, SlopeFlipsUnderReversal) {
  Rng rng(13);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v(2 + rng.below(30));
    for (auto& x : v) x = -std::abs(rng.normal());
    const double s = logprob_stats(v)(3);
    std::reverse(v.begin(), v.end());
    EXPECT_NEAR(logprob_stats(v)(3), -s, 1e-12);
  }
}

TEST(BuildFeatures, RecipeDimsHold) {
  Rng rng(14);
  std::vector<ActivationRecord> recs;
  for (int i = 0; i < 6; ++i) {
    auto r = random_record("r" + std::to_string(i), 4, 5, 3, rng);
    r.last_token = random_matrix(4, 5, rng);
    r.before_state = random_matrix(1, 20, rng).row(0).transpose();
    r.after_state = random_matrix(1, 20, rng).row(0).transpose();
    r.token_logprobs = std::vector<float>(3, -1.0f);
    recs.push_back(r);
  }
  RecipeOptions opt;
  opt.taps = resolve_taps(kDefaultTapFractions, 20);
  const std::vector<std::pair<Recipe, std::size_t>> want = {
      {Recipe::Drift, 6 * 7},   {Recipe::DriftConcat, 15}, {Recipe::Saplma, 5},       {Recipe::HalluShift, 1},
      {Recipe::ActVariance, 20}, {Recipe::AnswerExpect, 22}, {Recipe::LogProbStats, 5},
  };
  for (const auto& [recipe, dim] : want) {
    const auto fm = build_features(recipe, recs, opt);
    EXPECT_EQ(fm.feature_dim(), dim) << to_string(recipe);
    EXPECT_EQ(fm.rows(), 6u);
    EXPECT_EQ(fm.example_ids[2], "r2");
    EXPECT_TRUE(fm.data.allFinite());
  }
}

TEST(FeatureIo, RoundTrip) {
  TempDir dir("features");
  FeatureMatrix fm;
  fm.recipe = Recipe::AnswerExpect;
  Rng rng(15);
  fm.data = random_matrix(4, 7, rng).cast<double>();
  fm.example_ids = {"a", "bb", "ccc", "d"};
  write_features(fm, dir / "f.bin");
  const auto back = read_features(dir / "f.bin");
  EXPECT_EQ(back.recipe, fm.recipe);
  EXPECT_EQ(back.data, fm.data);
  EXPECT_EQ(back.example_ids, fm.example_ids);
  std::ofstream(dir / "bad.bin") << "nonsense";
  EXPECT_EQ(error_code_of([&] { read_features(dir / "bad.bin"); }), ErrorCode::BadMagic);
}
