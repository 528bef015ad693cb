#include "driftkit/eval_stats.hpp"

#include "support.hpp"

#include <cmath>

using namespace driftkit;
using namespace testing_support;

namespace {

double brute_auroc(const std::vector<double>& s, const Labels& y) {
  double wins = 0;
  double pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return wins / pairs;
}

ScoredSet random_set(Rng& rng, std::size_t n, int levels) {
  ScoredSet set;
  for (std::size_t i = 0; i < n; ++i) {
    set.labels.push_back(static_cast<int>(rng.below(2)));
    set.scores.push_back(levels > 0 ? static_cast<double>(rng.below(levels)) : rng.normal());
  }
  set.labels[0] = 0;
  set.labels[1] = 1;
  return set;
}

}  // namespace

TEST(Auroc, FourPointExample) {
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  const Labels y = {0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(auroc(s, y), 0.75);
  EXPECT_DOUBLE_EQ(auroc(s, y), brute_auroc(s, y));
}

TEST(Auroc, PerfectAndAllTies) {
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{1, 2, 3, 4}, Labels{0, 0, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{2, 2, 2, 2}, Labels{0, 1, 0, 1}), 0.5);
}

TEST(Auroc, SingleClassAndLengthMismatch) {
  EXPECT_EQ(error_code_of([] { auroc(std::vector<double>{1, 2}, Labels{1, 1}); }), ErrorCode::SingleClass);
  EXPECT_EQ(error_code_of([] { auroc(std::vector<double>{1, 2, 3}, Labels{0, 1}); }), ErrorCode::DimMismatch);
}

TEST(Auroc, MatchesBruteForceWithTies) {
  Rng rng(1);
  for (int t = 0; t < 300; ++t) {
    const auto set = random_set(rng, 2 + rng.below(299), t % 3 == 0 ? 0 : 1 + static_cast<int>(rng.below(10)));
    EXPECT_NEAR(auroc(set), brute_auroc(set.scores, set.labels), 1e-12);
  }
}

TEST(Auroc, ComplementAndMonotoneInvariance) {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    auto set = random_set(rng, 50, t % 2 ? 5 : 0);
    std::vector<double> neg(set.scores.size()), mapped(set.scores.size());
    for (std::size_t i = 0; i < neg.size(); ++i) {
      neg[i] = -set.scores[i];
      mapped[i] = std::exp(0.5 * set.scores[i]) + 7.0;
    }
    EXPECT_DOUBLE_EQ(auroc(set.scores, set.labels) + auroc(neg, set.labels), 1.0);
    EXPECT_DOUBLE_EQ(auroc(set.scores, set.labels), auroc(mapped, set.labels));
  }
}

TEST(RocCurve, PerfectPassesThroughCorner) {
  const auto c = roc_curve(std::vector<double>{0.1, 0.2, 0.8, 0.9}, Labels{0, 0, 1, 1});
  bool corner = false;
  for (const auto& p : c) corner |= p.fpr == 0.0 && p.tpr == 1.0;
  EXPECT_TRUE(corner);
}

TEST(RocCurve, FourPointEnumeration) {
  const auto c = roc_curve(std::vector<double>{0.1, 0.4, 0.35, 0.8}, Labels{0, 0, 1, 1});
  // thresholds 0.8, 0.4, 0.35, 0.1
  const std::vector<std::pair<double, double>> expect = {{0, 0}, {0, 0.5}, {0.5, 0.5}, {0.5, 1}, {1, 1}};
  ASSERT_EQ(c.size(), expect.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_DOUBLE_EQ(c[i].fpr, expect[i].first);
    EXPECT_DOUBLE_EQ(c[i].tpr, expect[i].second);
  }
}

TEST(RocCurve, AreaEqualsAurocAndMonotone) {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto set = random_set(rng, 5 + rng.below(500), t % 2 ? 8 : 0);
    const auto c = roc_curve(set.scores, set.labels);
    EXPECT_EQ(c.front().fpr, 0.0);
    EXPECT_EQ(c.front().tpr, 0.0);
    EXPECT_EQ(c.back().fpr, 1.0);
    EXPECT_EQ(c.back().tpr, 1.0);
    for (std::size_t i = 1; i < c.size(); ++i) {
      EXPECT_GE(c[i].fpr, c[i - 1].fpr);
      EXPECT_GE(c[i].tpr, c[i - 1].tpr);
    }
    EXPECT_NEAR(trapezoid_area(c), auroc(set), 1e-12);
  }
}

TEST(Bootstrap, TightWhenWellSeparated) {
  ScoredSet set;
  for (int i = 0; i < 500; ++i) {
    set.labels.push_back(i % 2);
    set.scores.push_back(i % 2 ? 10.0 + i : static_cast<double>(i) - 1000);
  }
  const auto b = bootstrap_ci(set.scores, set.labels, 1000, 42);
  EXPECT_LT(b.ci_high - b.ci_low, 0.05);
  EXPECT_NEAR(b.ci_high, 1.0, 1e-12);
}

TEST(Bootstrap, IdenticalScores) {
  const std::vector<double> s(40, 1.0);
  Labels y(40);
  for (int i = 0; i < 40; ++i) y[i] = i % 2;
  const auto b = bootstrap_ci(s, y);
  EXPECT_DOUBLE_EQ(b.ci_low, 0.5);
  EXPECT_DOUBLE_EQ(b.ci_high, 0.5);
}

TEST(Bootstrap, ReproducibleAndOrdered) {
  Rng rng(4);
  const auto set = random_set(rng, 120, 0);
  const auto a = bootstrap_ci(set.scores, set.labels, 300, 9);
  const auto b = bootstrap_ci(set.scores, set.labels, 300, 9);
  EXPECT_EQ(a.replicates, b.replicates);
  EXPECT_LE(a.ci_low, a.ci_high);
  EXPECT_EQ(a.n_bootstrap, 300u);
  EXPECT_EQ(a.replicates.size(), 300u);
}

TEST(Bootstrap, RedrawsSingleClassResamples) {
  // One positive among 30: many resamples miss it and are redrawn.
  std::vector<double> s(30);
  Labels y(30, 0);
  for (int i = 0; i < 30; ++i) s[i] = i;
  y[29] = 1;
  const auto b = bootstrap_ci(s, y, 200, 1);
  EXPECT_GT(b.redraws, 0u);
  EXPECT_EQ(b.replicates.size(), 200u);
}

// With two rows, half of all draws are single-class on average, so the
// > 50% rule trips for some seeds and must hold for the rest.
TEST(Bootstrap, DegenerateResampling) {
  const std::vector<double> s = {0.2, 0.7};
  const Labels y = {0, 1};
  std::size_t thrown = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    try {
      const auto b = bootstrap_ci(s, y, 100, seed);
      EXPECT_LE(2 * b.redraws, b.n_bootstrap + b.redraws);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::DegenerateResampling);
      ++thrown;
    }
  }
  EXPECT_GT(thrown, 0u);
  EXPECT_LT(thrown, 40u);
}

TEST(Permutation, NearHalfAndReproducible) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    ScoredSet set = random_set(rng, 200 + rng.below(300), 0);
    for (std::size_t i = 0; i < set.scores.size(); ++i) set.scores[i] += 2.0 * set.labels[i];
    const double n1 = permutation_null(set.scores, set.labels, 30, t);
    EXPECT_GE(n1, 0.45);
    EXPECT_LE(n1, 0.55);
    EXPECT_EQ(n1, permutation_null(set.scores, set.labels, 30, t));
  }
}

TEST(Permutation, TwoPointExpectation) {
  // Either shuffle gives 0 or 1; the mean over many shuffles tends to 0.5.
  const double m = permutation_null(std::vector<double>{0.0, 1.0}, Labels{0, 1}, 4000, 3);
  EXPECT_NEAR(m, 0.5, 0.05);
}

TEST(ResampleReportTest, FieldsFilled) {
  Rng rng(6);
  const auto set = random_set(rng, 100, 0);
  const auto r = resample_report(set, 200, 10, 5);
  EXPECT_DOUBLE_EQ(r.point_estimate, auroc(set));
  EXPECT_EQ(r.n_bootstrap, 200u);
  EXPECT_EQ(r.n_permutations, 10u);
  EXPECT_EQ(r.seed, 5u);
}

TEST(Percentile, NumpyLinear) {
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4}, 50), 2.5);
  EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 0), 1.0);
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4, 5}, 2.5), 1.1);
}
