#include "driftkit/corpus.hpp"
#include "driftkit/eval_stats.hpp"
#include "driftkit/probes.hpp"

#include "support.hpp"

#include <cmath>
#include <numeric>

using namespace driftkit;
using namespace testing_support;

namespace {

Matrix gaussian(std::size_t n, std::size_t d, Rng& rng) {
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

Labels coin_labels(std::size_t n, Rng& rng) {
  Labels y(n);
  for (auto& v : y) v = static_cast<int>(rng.below(2));
  y[0] = 0;
  y[1] = 1;
  return y;
}

std::vector<double> as_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

IndexList iota_list(std::size_t n) {
  IndexList idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace

TEST(Standardizer, ConstantColumnMasked) {
  Matrix x(4, 2);
  x << 1, 5, 2, 5, 3, 5, 4, 5;
  const auto s = fit_standardizer(x);
  EXPECT_FALSE(s.zero_variance_mask[0]);
  EXPECT_TRUE(s.zero_variance_mask[1]);
  const Matrix t = s.transform(x);
  EXPECT_EQ(t.col(1), Vector::Zero(4));
}

TEST(Standardizer, HandComputed) {
  Matrix x(3, 2);
  x << 1, 10, 2, 20, 6, 60;
  const auto s = fit_standardizer(x);
  EXPECT_DOUBLE_EQ(s.means(0), 3.0);
  EXPECT_DOUBLE_EQ(s.means(1), 30.0);
  EXPECT_NEAR(s.stds(0), std::sqrt(14.0 / 3.0), 1e-15);
  EXPECT_NEAR(s.stds(1), std::sqrt(1400.0 / 3.0), 1e-12);
}

TEST(Standardizer, ZeroMeanUnitStd) {
  Rng rng(1);
  Matrix x = gaussian(50, 6, rng);
  x.col(2) *= 1e4;
  x.col(3).array() += 1e3;
  const Matrix t = fit_standardizer(x).transform(x);
  for (int c = 0; c < 6; ++c) {
    const double m = t.col(c).mean();
    const double sd = std::sqrt((t.col(c).array() - m).square().mean());
    EXPECT_NEAR(m, 0.0, 1e-10);
    EXPECT_NEAR(sd, 1.0, 1e-10);
  }
}

TEST(Standardizer, TooFewRows) {
  EXPECT_EQ(error_code_of([] { fit_standardizer(Matrix::Ones(1, 3)); }), ErrorCode::TooFewRows);
}

TEST(Logistic, SeparableOneD) {
  Matrix x(8, 1);
  x << -4, -3, -2, -1, 1, 2, 3, 4;
  const Labels y = {0, 0, 0, 0, 1, 1, 1, 1};
  double prev = 0.0;
  for (double C : kCGrid) {
    const auto p = fit_logistic(x, y, C);
    EXPECT_TRUE(p.convergence.converged);
    EXPECT_DOUBLE_EQ(auroc(as_vec(decision_function(p, x)), y), 1.0);
    EXPECT_GT(p.weights.norm(), prev);
    prev = p.weights.norm();
  }
}

TEST(Logistic, RandomSearchCertifiesOptimum) {
  Rng rng(2);
  const Matrix x = gaussian(6, 2, rng);
  const Labels y = {0, 1, 0, 1, 1, 0};
  const double C = 0.7;
  const auto p = fit_logistic(x, y, C);
  const double best = logistic_objective(x, y, p.weights, p.bias, C);
  for (int i = 0; i < 1000; ++i) {
    Vector w(2);
    w << 4 * rng.normal(), 4 * rng.normal();
    EXPECT_LE(best, logistic_objective(x, y, w, 4 * rng.normal(), C) + 1e-12);
  }
}

TEST(Logistic, GradientToleranceAcrossDatasets) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 20 + rng.below(200), d = 1 + rng.below(60);
    Matrix x = gaussian(n, d, rng);
    const Labels y = coin_labels(n, rng);
    for (std::size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(i), 0) += 2.0 * y[i];
    const double C = kCGrid[rng.below(kCGrid.size())];
    const auto p = fit_logistic(x, y, C);
    const Vector g = logistic_gradient(x, y, p.weights, p.bias, C);
    EXPECT_LE(g.cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_TRUE(p.convergence.converged);
    EXPECT_NEAR(p.convergence.gradient_norm, g.cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Logistic, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  const Matrix x = gaussian(30, 4, rng);
  const Labels y = coin_labels(30, rng);
  Vector w(4);
  w << 0.3, -0.2, 0.5, 0.1;
  const double b = 0.2, C = 0.1, h = 1e-6;
  const Vector g = logistic_gradient(x, y, w, b, C);
  for (int j = 0; j < 4; ++j) {
    Vector wp = w, wm = w;
    wp(j) += h;
    wm(j) -= h;
    EXPECT_NEAR(g(j), (logistic_objective(x, y, wp, b, C) - logistic_objective(x, y, wm, b, C)) / (2 * h), 1e-7);
  }
  EXPECT_NEAR(g(4), (logistic_objective(x, y, w, b + h, C) - logistic_objective(x, y, w, b - h, C)) / (2 * h), 1e-7);
}

TEST(Logistic, SingleClassAndNan) {
  EXPECT_EQ(error_code_of([] { fit_logistic(Matrix::Ones(4, 2), Labels(4, 1), 1.0); }), ErrorCode::SingleClass);
  Matrix x = Matrix::Ones(4, 2);
  x(1, 1) = std::nan("");
  EXPECT_EQ(error_code_of([&] { fit_logistic(x, {0, 1, 0, 1}, 1.0); }), ErrorCode::NanDetected);
}

TEST(Logistic, Deterministic) {
  Rng rng(5);
  const Matrix x = gaussian(80, 10, rng);
  const Labels y = coin_labels(80, rng);
  const auto a = fit_logistic(x, y, 0.1), b = fit_logistic(x, y, 0.1);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.bias, b.bias);
}

TEST(CvSelect, GridIsPaperValues) {
  EXPECT_EQ(std::vector<double>(kCGrid.begin(), kCGrid.end()), (std::vector<double>{0.001, 0.01, 0.1, 1.0}));
}

TEST(CvSelect, TiesGoToSmallestC) {
  Rng rng(6);
  const std::size_t n = 60;
  const Labels y = coin_labels(n, rng);
  Matrix x(n, 1);
  for (std::size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(i), 0) = y[i] + rng.normal();
  const auto folds = stratified_folds(iota_list(n), y, 5, 1);
  const auto sel = cv_select_C(x, y, folds);
  for (const auto& [C, a] : sel.table) EXPECT_DOUBLE_EQ(a, sel.table[0].second);
  EXPECT_DOUBLE_EQ(sel.C, 0.001);
}

TEST(CvSelect, HighDimensionalNoisePrefersSmallC) {
  Rng rng(7);
  const std::size_t n = 80, d = 400;
  const Labels y = coin_labels(n, rng);
  Matrix x = gaussian(n, d, rng);
  for (std::size_t i = 0; i < n; ++i)
    for (int j = 0; j < 5; ++j) x(static_cast<Eigen::Index>(i), j) += 0.8 * y[i];
  const auto folds = stratified_folds(iota_list(n), y, 5, 3);
  const auto sel = cv_select_C(x, y, folds);
  // Exhaustive oracle: argmax of the table, ties to the smaller C.
  double best_C = sel.table[0].first, best = sel.table[0].second;
  for (const auto& [C, a] : sel.table)
    if (a > best) best = a, best_C = C;
  EXPECT_DOUBLE_EQ(sel.C, best_C);
  EXPECT_LT(sel.C, 1.0);
  EXPECT_EQ(sel.table.size(), 4u);
}

TEST(CvSelect, NoiseLabelsNearChance) {
  Rng rng(8);
  const std::size_t n = 200;
  const Matrix x = gaussian(n, 5, rng);
  const Labels y = coin_labels(n, rng);
  const auto folds = stratified_folds(iota_list(n), y, 5, 42);
  for (const auto& [C, a] : cv_select_C(x, y, folds).table) EXPECT_NEAR(a, 0.5, 0.1) << C;
}

TEST(Mlp, HiddenWidth) {
  EXPECT_EQ(mlp_hidden_width(100), 25u);
  EXPECT_EQ(mlp_hidden_width(4096), 256u);
  EXPECT_EQ(mlp_hidden_width(2), 1u);
  EXPECT_EQ(init_mlp(100).hidden_width(), 25u);
}

TEST(Mlp, LearnsXorEmbedded) {
  // XOR in the first two coordinates, 30 further noise dimensions.
  Rng rng(9);
  const std::size_t n = 400, d = 32;
  Matrix x = 0.3 * gaussian(n, d, rng);
  Labels y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int a = static_cast<int>(rng.below(2)), b = static_cast<int>(rng.below(2));
    x(static_cast<Eigen::Index>(i), 0) += a ? 1.0 : -1.0;
    x(static_cast<Eigen::Index>(i), 1) += b ? 1.0 : -1.0;
    y[i] = a ^ b;
  }
  MlpConfig cfg;
  cfg.learning_rate = 1e-2;
  const auto probe = fit_mlp(x, y, cfg);
  EXPECT_GE(auroc(as_vec(decision_function(probe, x)), y), 0.95);
  // A linear probe cannot.
  const auto lin = fit_logistic(x, y, 1.0);
  EXPECT_LT(auroc(as_vec(decision_function(lin, x)), y), 0.7);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  Rng rng(10);
  const Matrix x = gaussian(12, 8, rng);
  std::vector<double> t(12);
  for (auto& v : t) v = rng.uniform();
  for (int point = 0; point < 20; ++point) {
    MlpConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(point);
    auto probe = init_mlp(8, cfg);
    probe.b1 = Vector::NullaryExpr(probe.b1.size(), [&](Eigen::Index) { return 0.3 * rng.normal(); });
    probe.b2 = 0.3 * rng.normal();
    const auto g = mlp_gradient(probe, x, t);
    const double h = 1e-6;
    auto check = [&](double& param, double analytic) {
      const double keep = param;
      param = keep + h;
      const double up = mlp_loss(probe, x, t);
      param = keep - h;
      const double down = mlp_loss(probe, x, t);
      param = keep;
      const double fd = (up - down) / (2 * h);
      const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-6});
      EXPECT_LT(std::abs(fd - analytic) / denom, 1e-4);
    };
    for (Eigen::Index i = 0; i < probe.w1.size(); i += 3) check(probe.w1.data()[i], g.w1.data()[i]);
    for (Eigen::Index i = 0; i < probe.b1.size(); ++i) check(probe.b1(i), g.b1(i));
    for (Eigen::Index i = 0; i < probe.w2.size(); ++i) check(probe.w2(i), g.w2(i));
    check(probe.b2, g.b2);
  }
}

TEST(Mlp, DeterministicAndOutputsInUnitInterval) {
  Rng rng(11);
  const Matrix x = gaussian(60, 8, rng);
  const Labels y = coin_labels(60, rng);
  MlpConfig cfg;
  cfg.epochs = 20;
  const auto a = fit_mlp(x, y, cfg), b = fit_mlp(x, y, cfg);
  EXPECT_EQ(a.w1, b.w1);
  EXPECT_EQ(a.b2, b.b2);
  const Vector s = score(a, x);
  EXPECT_GT(s.minCoeff(), 0.0);
  EXPECT_LT(s.maxCoeff(), 1.0);
  EXPECT_EQ(error_code_of([&] { fit_mlp(x, Labels(60, 0), cfg); }), ErrorCode::SingleClass);
  EXPECT_TRUE(std::isfinite(a.final_loss));
}

TEST(Score, Conventions) {
  LogisticProbe p;
  p.weights = Vector::Zero(3);
  Rng rng(12);
  const Matrix x = gaussian(5, 3, rng);
  EXPECT_EQ(score(p, x), Vector::Constant(5, 0.5));
  p.weights << 0.5, -1.0, 2.0;
  const Vector before = score(p, x);
  p.bias = 10;
  const Vector after = score(p, x);
  for (int i = 0; i < 5; ++i) EXPECT_GT(after(i), before(i));
  p.bias = 0.25;
  Matrix one(1, 3);
  one << 1.0, 2.0, 0.5;
  const double z = 0.5 - 2.0 + 1.0 + 0.25;
  EXPECT_NEAR(score(p, one)(0), 1.0 / (1.0 + std::exp(-z)), 1e-15);
  EXPECT_EQ(error_code_of([&] { score(p, Matrix::Ones(2, 4)); }), ErrorCode::DimMismatch);
}

TEST(Score, RankingInvariantUnderMonotoneMaps) {
  Rng rng(13);
  const Matrix x = gaussian(100, 3, rng);
  const Labels y = coin_labels(100, rng);
  const auto p = fit_logistic(x, y, 1.0);
  const Vector z = decision_function(p, x);
  std::vector<double> cubic(100);
  for (int i = 0; i < 100; ++i) cubic[i] = z(i) * z(i) * z(i) + 3.0;
  EXPECT_DOUBLE_EQ(auroc(as_vec(z), y), auroc(cubic, y));
}

TEST(ExportDirection, IdentityAndMasked) {
  Rng rng(14);
  LogisticProbe p;
  p.weights = Vector::NullaryExpr(4, [&](Eigen::Index) { return rng.normal(); });
  const auto id = export_direction(p, Standardizer::identity(4));
  EXPECT_EQ(id.raw, p.weights);
  EXPECT_NEAR(id.unit.norm(), 1.0, 1e-15);

  Matrix x = gaussian(10, 4, rng);
  x.col(1).setConstant(3.0);
  const auto s = fit_standardizer(x);
  const auto d = export_direction(p, s);
  EXPECT_EQ(d.raw(1), 0.0);
}

TEST(ExportDirection, ScoreEquivalence) {
  Rng rng(15);
  const Matrix x = 3.0 * gaussian(50, 6, rng) + Matrix::Constant(50, 6, 2.0);
  const Labels y = coin_labels(50, rng);
  const auto s = fit_standardizer(x);
  const auto p = fit_logistic(s.transform(x), y, 1.0);
  const auto d = export_direction(p, s);
  const Vector lhs = decision_function(p, s.transform(x));
  const Vector rhs = (x * d.raw).array() + d.intercept;
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Pipeline, FoldsClampToMinorityAndFits) {
  Rng rng(16);
  const Matrix x = gaussian(30, 3, rng);
  Labels y(30, 0);
  y[0] = y[1] = y[2] = 1;
  const auto pipe = fit_linear_pipeline(x, y);
  EXPECT_EQ(pipe.score(x).size(), 30);
  y[1] = y[2] = 0;
  EXPECT_THROW(fit_linear_pipeline(x, y), Error);
}

TEST(Serialization, ProbeAndDirectionRoundTrip) {
  TempDir dir("probes");
  Rng rng(17);
  const Matrix x = gaussian(40, 5, rng);
  const Labels y = coin_labels(40, rng);
  const auto s = fit_standardizer(x);
  const auto p = fit_logistic(s.transform(x), y, 0.1);
  save_probe(dir / "lin.json", s, p);
  const auto back = load_probe(dir / "lin.json");
  ASSERT_TRUE(back.logistic);
  EXPECT_EQ(back.logistic->weights, p.weights);
  EXPECT_EQ(back.scaler.means, s.means);

  MlpConfig cfg;
  cfg.epochs = 3;
  const auto m = fit_mlp(s.transform(x), y, cfg);
  save_probe(dir / "mlp.json", s, m);
  const auto mb = load_probe(dir / "mlp.json");
  ASSERT_TRUE(mb.mlp);
  EXPECT_EQ(mb.mlp->w1, m.w1);
  EXPECT_EQ(score(*mb.mlp, s.transform(x)), score(m, s.transform(x)));

  const auto d = export_direction(p, s);
  write_direction(dir / "w.txt", d.unit);
  EXPECT_EQ(read_direction(dir / "w.txt"), d.unit);
}
