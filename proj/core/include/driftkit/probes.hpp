#pragma once

#include "driftkit/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace driftkit {

struct Standardizer {
  Vector means;
  /// Population standard deviations.
  Vector stds;
  /// true = zero-variance column, transformed to exactly 0.
  std::vector<bool> zero_variance_mask;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(means.size()); }
  Matrix transform(const Matrix& x) const;
  /// Identity transform of width d (means 0, stds 1, nothing masked).
  static Standardizer identity(std::size_t d);
};

Standardizer fit_standardizer(const Matrix& train);

struct ConvergenceInfo {
  std::size_t iterations = 0;
  /// Infinity norm of the objective gradient at the returned point.
  double gradient_norm = 0.0;
  bool converged = false;
};

struct LogisticOptions {
  double tolerance = 1e-6;
  std::size_t max_iterations = 2000;
};

struct LogisticProbe {
  Vector weights;
  double bias = 0.0;
  double C = 1.0;
  ConvergenceInfo convergence;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(weights.size()); }
};

inline constexpr std::array<double, 4> kCGrid = {0.001, 0.01, 0.1, 1.0};

/// (1/n) sum log(1 + exp(-y (w.x + b))) + ||w||^2 / (2 C n), y in {-1, +1}.
double logistic_objective(const Matrix& x, const Labels& labels, const Vector& weights, double bias, double C);
/// Gradient of logistic_objective as [d/dw, d/db].
Vector logistic_gradient(const Matrix& x, const Labels& labels, const Vector& weights, double bias, double C);

/// Truncated Newton (preconditioned CG on Hessian-vector products) with an
/// Armijo backtracking line search, started from zero. Failing to reach the
/// tolerance is reported through `convergence`, not thrown.
LogisticProbe fit_logistic(const Matrix& x, const Labels& labels, double C, const LogisticOptions& options = {});

struct CvSelection {
  double C = kCGrid.front();
  /// (C, mean held-out AUROC) in grid order.
  std::vector<std::pair<double, double>> table;
};

/// `folds[i]` is the fold id of row i (see stratified_folds). Each fold fits
/// its own standardizer on the fit rows. Ties go to the smaller C.
CvSelection cv_select_C(const Matrix& x, const Labels& labels, const std::vector<std::size_t>& folds,
                        std::span<const double> grid = kCGrid);

struct MlpConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::uint64_t seed = 42;
  /// Step size follows 0.5 (1 + cos(pi e / epochs)) per epoch.
  bool cosine_decay = true;
};

/// Two-layer ReLU network with a sigmoid output unit.
struct MlpProbe {
  Matrix w1;  // hidden x D
  Vector b1;
  Vector w2;  // hidden
  double b2 = 0.0;
  MlpConfig config;
  double final_loss = 0.0;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(w1.cols()); }
  std::size_t hidden_width() const noexcept { return static_cast<std::size_t>(w1.rows()); }
};

/// min(256, floor(D / 4)), at least 1.
std::size_t mlp_hidden_width(std::size_t d);

/// He-initialized network, seeded.
MlpProbe init_mlp(std::size_t d, const MlpConfig& config = {});

struct MlpGradient {
  Matrix w1;
  Vector b1;
  Vector w2;
  double b2 = 0.0;
};

/// Mean binary cross-entropy against soft targets in [0, 1].
double mlp_loss(const MlpProbe& probe, const Matrix& x, std::span<const double> targets);
MlpGradient mlp_gradient(const MlpProbe& probe, const Matrix& x, std::span<const double> targets);

/// Minibatch Adam for a fixed number of epochs.
MlpProbe fit_mlp(const Matrix& x, const Labels& labels, const MlpConfig& config = {});
/// Same, with soft targets; no class check.
MlpProbe fit_mlp_soft(const Matrix& x, std::span<const double> targets, const MlpConfig& config = {});

/// Sigmoid outputs. Throw DimMismatch on a column-count mismatch.
Vector score(const LogisticProbe& probe, const Matrix& x);
Vector score(const MlpProbe& probe, const Matrix& x);
Vector decision_function(const LogisticProbe& probe, const Matrix& x);
/// Output-unit logits; same ranking as score() without sigmoid saturation.
Vector decision_function(const MlpProbe& probe, const Matrix& x);

struct Direction {
  /// Weights in raw feature space; 0 on masked columns.
  Vector raw;
  /// raw / ||raw|| (all zeros if raw is zero).
  Vector unit;
  /// w . standardize(x) + b == raw . x + intercept.
  double intercept = 0.0;
};

Direction export_direction(const LogisticProbe& probe, const Standardizer& standardizer);

/// Standardizer followed by a logistic probe with CV-chosen C. The fold
/// count shrinks to the minority class size when that is smaller.
struct LinearPipeline {
  Standardizer scaler;
  LogisticProbe probe;
  CvSelection cv;

  Vector score(const Matrix& x) const;
  Vector decision_function(const Matrix& x) const;
};

LinearPipeline fit_linear_pipeline(const Matrix& x, const Labels& labels, std::size_t n_folds = 5,
                                   std::uint64_t seed = 42);

void save_probe(const std::filesystem::path& path, const Standardizer& scaler, const LogisticProbe& probe);
void save_probe(const std::filesystem::path& path, const Standardizer& scaler, const MlpProbe& probe);

struct LoadedProbe {
  Standardizer scaler;
  std::optional<LogisticProbe> logistic;
  std::optional<MlpProbe> mlp;
};
LoadedProbe load_probe(const std::filesystem::path& path);

/// One %.17g value per line.
void write_direction(const std::filesystem::path& path, const Vector& direction);
Vector read_direction(const std::filesystem::path& path);

}  // namespace driftkit
