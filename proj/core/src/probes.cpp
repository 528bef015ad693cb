#include "driftkit/probes.hpp"

#include "driftkit/corpus.hpp"
#include "driftkit/error.hpp"
#include "driftkit/eval_stats.hpp"
#include "driftkit/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>

namespace driftkit {

namespace {

double softplus(double a) { return std::max(a, 0.0) + std::log1p(std::exp(-std::abs(a))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_labels(const Matrix& x, const Labels& labels) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw Error(ErrorCode::DimMismatch, "feature rows and labels differ in length");
  }
  std::size_t pos = 0;
  for (int y : labels) pos += (y == 1);
  if (pos == 0 || pos == labels.size()) throw Error(ErrorCode::SingleClass, "probe training needs both classes");
  if (!x.allFinite()) throw Error(ErrorCode::NanDetected, "feature matrix contains non-finite values");
}

Vector signed_labels(const Labels& labels) {
  Vector y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y[static_cast<Eigen::Index>(i)] = labels[i] == 1 ? 1.0 : -1.0;
  return y;
}

Matrix take_rows(const Matrix& x, const IndexList& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

template <typename T>
std::vector<T> take(const std::vector<T>& v, const IndexList& rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

// Logistic objective pieces shared by the solver and the public helpers.
struct LogisticState {
  const Matrix& x;
  const Vector& y;
  double inv_cn;  // 1 / (C n)
  double n;

  double objective(const Vector& w, const Vector& z) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) s += softplus(-y[i] * z[i]);
    return s / n + 0.5 * inv_cn * w.squaredNorm();
  }

  Vector margins(const Vector& w, double b) const { return (x * w).array() + b; }

  Vector gradient(const Vector& w, const Vector& z) const {
    Vector r(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) r[i] = -y[i] * sigmoid(-y[i] * z[i]);
    Vector g(w.size() + 1);
    g.head(w.size()) = x.transpose() * r / n + inv_cn * w;
    g[w.size()] = r.sum() / n;
    return g;
  }
};

}  // namespace

// ---- Standardizer ----

Matrix Standardizer::transform(const Matrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != dim()) {
    throw Error(ErrorCode::DimMismatch, "standardizer expects " + std::to_string(dim()) + " columns, got " +
                                            std::to_string(x.cols()));
  }
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (zero_variance_mask[static_cast<std::size_t>(j)]) {
      out.col(j).setZero();
    } else {
      out.col(j) = (x.col(j).array() - means[j]) / stds[j];
    }
  }
  return out;
}

Standardizer Standardizer::identity(std::size_t d) {
  Standardizer s;
  s.means = Vector::Zero(static_cast<Eigen::Index>(d));
  s.stds = Vector::Ones(static_cast<Eigen::Index>(d));
  s.zero_variance_mask.assign(d, false);
  return s;
}

Standardizer fit_standardizer(const Matrix& train) {
  if (train.rows() < 2) throw Error(ErrorCode::TooFewRows, "standardizer needs at least 2 rows");
  Standardizer s;
  const double n = static_cast<double>(train.rows());
  s.means = train.colwise().sum().transpose() / n;
  s.stds.resize(train.cols());
  s.zero_variance_mask.assign(static_cast<std::size_t>(train.cols()), false);
  for (Eigen::Index j = 0; j < train.cols(); ++j) {
    const double var = (train.col(j).array() - s.means[j]).square().sum() / n;
    const double floor = 1e-12 * std::max(1.0, std::abs(s.means[j]));
    if (!(var > floor * floor)) {
      s.zero_variance_mask[static_cast<std::size_t>(j)] = true;
      s.stds[j] = 0.0;
    } else {
      s.stds[j] = std::sqrt(var);
    }
  }
  return s;
}

// ---- Logistic probe ----

double logistic_objective(const Matrix& x, const Labels& labels, const Vector& weights, double bias, double C) {
  const Vector y = signed_labels(labels);
  const LogisticState st{x, y, 1.0 / (C * static_cast<double>(x.rows())), static_cast<double>(x.rows())};
  return st.objective(weights, st.margins(weights, bias));
}

Vector logistic_gradient(const Matrix& x, const Labels& labels, const Vector& weights, double bias, double C) {
  const Vector y = signed_labels(labels);
  const LogisticState st{x, y, 1.0 / (C * static_cast<double>(x.rows())), static_cast<double>(x.rows())};
  return st.gradient(weights, st.margins(weights, bias));
}

LogisticProbe fit_logistic(const Matrix& x, const Labels& labels, double C, const LogisticOptions& options) {
  check_labels(x, labels);
  if (!(C > 0.0)) throw Error(ErrorCode::InvalidArgument, "C must be positive");
  const Eigen::Index d = x.cols();
  const double n = static_cast<double>(x.rows());
  const Vector y = signed_labels(labels);
  const LogisticState st{x, y, 1.0 / (C * n), n};

  Vector w = Vector::Zero(d);
  double b = 0.0;
  Vector z = Vector::Zero(x.rows());
  double f = st.objective(w, z);
  Vector g = st.gradient(w, z);

  LogisticProbe probe;
  probe.C = C;
  std::size_t iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    if (gnorm <= options.tolerance) break;

    Vector s(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double p = sigmoid(z[i]);
      s[i] = p * (1.0 - p);
    }
    auto hess_vec = [&](const Vector& v) {
      const Vector t = s.cwiseProduct((x * v.head(d)).array().matrix() + Vector::Constant(z.size(), v[d]));
      Vector out(d + 1);
      out.head(d) = x.transpose() * t / n + st.inv_cn * v.head(d);
      out[d] = t.sum() / n;
      return out;
    };
    Vector precond(d + 1);
    precond.head(d) = (s.transpose() * x.array().square().matrix()).transpose() / n;
    precond.head(d).array() += st.inv_cn;
    precond[d] = std::max(s.sum() / n, 1e-12);

    // Preconditioned CG on H p = -g.
    Vector p = Vector::Zero(d + 1);
    Vector r = -g;
    Vector zc = r.cwiseQuotient(precond);
    Vector dir = zc;
    double rz = r.dot(zc);
    const double gnorm2 = g.norm();
    const double cg_tol = std::min(0.5, std::sqrt(gnorm2)) * gnorm2;
    const std::size_t cg_max = static_cast<std::size_t>(std::min<Eigen::Index>(d + 1, 500));
    for (std::size_t k = 0; k < cg_max; ++k) {
      const Vector hd = hess_vec(dir);
      const double curv = dir.dot(hd);
      if (curv <= 0.0) break;
      const double alpha = rz / curv;
      p += alpha * dir;
      r -= alpha * hd;
      if (r.norm() <= cg_tol) break;
      zc = r.cwiseQuotient(precond);
      const double rz_new = r.dot(zc);
      dir = zc + (rz_new / rz) * dir;
      rz = rz_new;
    }
    if (p.isZero(0.0)) p = -g.cwiseQuotient(precond);

    // Armijo backtracking. Close to the optimum objective differences sink
    // below rounding, so a step that shrinks the gradient is also accepted.
    const double slope = g.dot(p);
    double t = 1.0;
    bool accepted = false;
    Vector w_new, z_new, g_new;
    double b_new = 0.0, f_new = 0.0;
    for (int ls = 0; ls < 60; ++ls) {
      w_new = w + t * p.head(d);
      b_new = b + t * p[d];
      z_new = st.margins(w_new, b_new);
      f_new = st.objective(w_new, z_new);
      if (f_new <= f + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      if (f_new <= f + 1e-14 * std::abs(f)) {
        g_new = st.gradient(w_new, z_new);
        if (g_new.lpNorm<Eigen::Infinity>() < gnorm) {
          accepted = true;
          break;
        }
        g_new.resize(0);
      }
      t *= 0.5;
    }
    if (!accepted) break;
    w = std::move(w_new);
    b = b_new;
    z = std::move(z_new);
    f = f_new;
    g = g_new.size() ? std::move(g_new) : st.gradient(w, z);
  }
  probe.weights = std::move(w);
  probe.bias = b;
  probe.convergence.iterations = iter;
  probe.convergence.gradient_norm = g.lpNorm<Eigen::Infinity>();
  probe.convergence.converged = probe.convergence.gradient_norm <= options.tolerance;
  return probe;
}

Vector decision_function(const LogisticProbe& probe, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != probe.dim()) {
    throw Error(ErrorCode::DimMismatch, "probe expects " + std::to_string(probe.dim()) + " columns, got " +
                                            std::to_string(x.cols()));
  }
  return (x * probe.weights).array() + probe.bias;
}

Vector score(const LogisticProbe& probe, const Matrix& x) {
  return decision_function(probe, x).unaryExpr([](double z) { return sigmoid(z); });
}

CvSelection cv_select_C(const Matrix& x, const Labels& labels, const std::vector<std::size_t>& folds,
                        std::span<const double> grid) {
  check_labels(x, labels);
  if (folds.size() != labels.size()) throw Error(ErrorCode::DimMismatch, "fold ids and rows differ in length");
  if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty C grid");
  const std::size_t k = folds.empty() ? 0 : *std::max_element(folds.begin(), folds.end()) + 1;
  IndexList all(labels.size());
  std::iota(all.begin(), all.end(), std::size_t{0});

  std::vector<double> sums(grid.size(), 0.0);
  for (std::size_t fold = 0; fold < k; ++fold) {
    const auto [fit_rows, held_rows] = fold_partition(all, folds, fold);
    const Matrix fit_raw = take_rows(x, fit_rows);
    const Standardizer scaler = fit_standardizer(fit_raw);
    const Matrix fit_x = scaler.transform(fit_raw);
    const Matrix held_x = scaler.transform(take_rows(x, held_rows));
    const Labels fit_y = take(labels, fit_rows);
    const Labels held_y = take(labels, held_rows);
    for (std::size_t c = 0; c < grid.size(); ++c) {
      const LogisticProbe probe = fit_logistic(fit_x, fit_y, grid[c]);
      const Vector s = decision_function(probe, held_x);
      sums[c] += auroc(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), held_y);
    }
  }
  CvSelection sel;
  double best = -1.0;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const double mean = sums[c] / static_cast<double>(k);
    sel.table.emplace_back(grid[c], mean);
    if (mean > best || (mean == best && grid[c] < sel.C)) {
      best = mean;
      sel.C = grid[c];
    }
  }
  return sel;
}

// ---- MLP probe ----

std::size_t mlp_hidden_width(std::size_t d) { return std::max<std::size_t>(1, std::min<std::size_t>(256, d / 4)); }

MlpProbe init_mlp(std::size_t d, const MlpConfig& config) {
  MlpProbe m;
  m.config = config;
  const auto h = static_cast<Eigen::Index>(mlp_hidden_width(d));
  const auto dd = static_cast<Eigen::Index>(d);
  Rng rng(config.seed, 0);
  const double s1 = std::sqrt(2.0 / static_cast<double>(d));
  const double s2 = std::sqrt(2.0 / static_cast<double>(h));
  m.w1.resize(h, dd);
  for (Eigen::Index i = 0; i < h; ++i)
    for (Eigen::Index j = 0; j < dd; ++j) m.w1(i, j) = s1 * rng.normal();
  m.b1 = Vector::Zero(h);
  m.w2.resize(h);
  for (Eigen::Index i = 0; i < h; ++i) m.w2[i] = s2 * rng.normal();
  m.b2 = 0.0;
  return m;
}

namespace {

void check_mlp_input(const MlpProbe& probe, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != probe.dim()) {
    throw Error(ErrorCode::DimMismatch, "MLP expects " + std::to_string(probe.dim()) + " columns, got " +
                                            std::to_string(x.cols()));
  }
}

Matrix hidden_pre(const MlpProbe& probe, const Matrix& x) {
  Matrix pre = x * probe.w1.transpose();
  pre.rowwise() += probe.b1.transpose();
  return pre;
}

Vector mlp_logits(const MlpProbe& probe, const Matrix& x) {
  const Matrix act = hidden_pre(probe, x).cwiseMax(0.0);
  return (act * probe.w2).array() + probe.b2;
}

template <typename A>
void adam_step(A& param, const A& grad, A& m, A& v, double lr, double bc1, double bc2) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  m = b1 * m + (1 - b1) * grad;
  v = b2 * v + (1 - b2) * grad.cwiseProduct(grad);
  param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

}  // namespace

double mlp_loss(const MlpProbe& probe, const Matrix& x, std::span<const double> targets) {
  check_mlp_input(probe, x);
  const Vector z = mlp_logits(probe, x);
  double s = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double t = targets[static_cast<std::size_t>(i)];
    s += t * softplus(-z[i]) + (1.0 - t) * softplus(z[i]);
  }
  return s / static_cast<double>(z.size());
}

MlpGradient mlp_gradient(const MlpProbe& probe, const Matrix& x, std::span<const double> targets) {
  check_mlp_input(probe, x);
  const double n = static_cast<double>(x.rows());
  const Matrix pre = hidden_pre(probe, x);
  const Matrix act = pre.cwiseMax(0.0);
  const Vector z = (act * probe.w2).array() + probe.b2;
  Vector dz(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) dz[i] = (sigmoid(z[i]) - targets[static_cast<std::size_t>(i)]) / n;

  MlpGradient g;
  g.w2 = act.transpose() * dz;
  g.b2 = dz.sum();
  Matrix dh = dz * probe.w2.transpose();
  dh.array() *= (pre.array() > 0.0).cast<double>();
  g.w1 = dh.transpose() * x;
  g.b1 = dh.colwise().sum().transpose();
  return g;
}

MlpProbe fit_mlp_soft(const Matrix& x, std::span<const double> targets, const MlpConfig& config) {
  if (static_cast<std::size_t>(x.rows()) != targets.size()) {
    throw Error(ErrorCode::DimMismatch, "feature rows and targets differ in length");
  }
  if (x.rows() == 0) throw Error(ErrorCode::TooFewRows, "MLP needs training rows");
  if (!x.allFinite()) throw Error(ErrorCode::NanDetected, "feature matrix contains non-finite values");
  if (config.batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch_size must be positive");

  MlpProbe m = init_mlp(static_cast<std::size_t>(x.cols()), config);
  Matrix m_w1 = Matrix::Zero(m.w1.rows(), m.w1.cols()), v_w1 = m_w1;
  Vector m_b1 = Vector::Zero(m.b1.size()), v_b1 = m_b1;
  Vector m_w2 = Vector::Zero(m.w2.size()), v_w2 = m_w2;
  Eigen::Matrix<double, 1, 1> b2, m_b2 = Eigen::Matrix<double, 1, 1>::Zero(), v_b2 = m_b2;
  b2(0) = m.b2;

  IndexList order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(config.seed, epoch + 1);
    rng.shuffle(std::span<std::size_t>(order));
    const double lr = config.cosine_decay
                          ? config.learning_rate * 0.5 *
                                (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) /
                                                static_cast<double>(config.epochs)))
                          : config.learning_rate;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const IndexList rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
      const Matrix xb = take_rows(x, rows);
      std::vector<double> tb;
      tb.reserve(rows.size());
      for (auto r : rows) tb.push_back(targets[r]);
      m.b2 = b2(0);
      MlpGradient g = mlp_gradient(m, xb, tb);
      ++step;
      const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(step));
      adam_step(m.w1, g.w1, m_w1, v_w1, lr, bc1, bc2);
      adam_step(m.b1, g.b1, m_b1, v_b1, lr, bc1, bc2);
      adam_step(m.w2, g.w2, m_w2, v_w2, lr, bc1, bc2);
      Eigen::Matrix<double, 1, 1> gb2;
      gb2(0) = g.b2;
      adam_step(b2, gb2, m_b2, v_b2, lr, bc1, bc2);
    }
  }
  m.b2 = b2(0);
  m.final_loss = mlp_loss(m, x, targets);
  return m;
}

MlpProbe fit_mlp(const Matrix& x, const Labels& labels, const MlpConfig& config) {
  check_labels(x, labels);
  std::vector<double> targets(labels.begin(), labels.end());
  return fit_mlp_soft(x, targets, config);
}

Vector decision_function(const MlpProbe& probe, const Matrix& x) {
  check_mlp_input(probe, x);
  return mlp_logits(probe, x);
}

Vector score(const MlpProbe& probe, const Matrix& x) {
  check_mlp_input(probe, x);
  return mlp_logits(probe, x).unaryExpr([](double z) { return sigmoid(z); });
}

// ---- Direction export ----

Direction export_direction(const LogisticProbe& probe, const Standardizer& standardizer) {
  if (probe.dim() != standardizer.dim()) throw Error(ErrorCode::DimMismatch, "probe and standardizer widths differ");
  Direction d;
  d.raw = Vector::Zero(probe.weights.size());
  d.intercept = probe.bias;
  for (Eigen::Index j = 0; j < d.raw.size(); ++j) {
    if (standardizer.zero_variance_mask[static_cast<std::size_t>(j)]) continue;
    d.raw[j] = probe.weights[j] / standardizer.stds[j];
    d.intercept -= d.raw[j] * standardizer.means[j];
  }
  const double norm = d.raw.norm();
  d.unit = norm > 0.0 ? Vector(d.raw / norm) : Vector::Zero(d.raw.size());
  return d;
}

// ---- Pipeline ----

Vector LinearPipeline::score(const Matrix& x) const { return driftkit::score(probe, scaler.transform(x)); }

Vector LinearPipeline::decision_function(const Matrix& x) const {
  return driftkit::decision_function(probe, scaler.transform(x));
}

LinearPipeline fit_linear_pipeline(const Matrix& x, const Labels& labels, std::size_t n_folds, std::uint64_t seed) {
  check_labels(x, labels);
  IndexList all(labels.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t minority = std::min(pos, labels.size() - pos);
  if (minority < 2) throw Error(ErrorCode::TooFewPerClass, "cross-validation needs at least 2 examples per class");
  const auto folds = stratified_folds(all, labels, std::min(n_folds, minority), seed);
  LinearPipeline pipe;
  pipe.cv = cv_select_C(x, labels, folds);
  pipe.scaler = fit_standardizer(x);
  pipe.probe = fit_logistic(pipe.scaler.transform(x), labels, pipe.cv.C);
  return pipe;
}

// ---- Serialization ----

namespace {

constexpr int kProbeFormatVersion = 1;

nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json scaler_json(const Standardizer& s) {
  return {{"means", vec_json(s.means)}, {"stds", vec_json(s.stds)}, {"mask", s.zero_variance_mask}};
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  out << j.dump(1) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

}  // namespace

void save_probe(const std::filesystem::path& path, const Standardizer& scaler, const LogisticProbe& probe) {
  nlohmann::json j;
  j["format"] = "driftkit-probe";
  j["version"] = kProbeFormatVersion;
  j["kind"] = "logistic";
  j["scaler"] = scaler_json(scaler);
  j["weights"] = vec_json(probe.weights);
  j["bias"] = probe.bias;
  j["C"] = probe.C;
  j["convergence"] = {{"iterations", probe.convergence.iterations},
                      {"gradient_norm", probe.convergence.gradient_norm},
                      {"converged", probe.convergence.converged}};
  write_json(path, j);
}

void save_probe(const std::filesystem::path& path, const Standardizer& scaler, const MlpProbe& probe) {
  nlohmann::json j;
  j["format"] = "driftkit-probe";
  j["version"] = kProbeFormatVersion;
  j["kind"] = "mlp";
  j["scaler"] = scaler_json(scaler);
  j["hidden"] = probe.hidden_width();
  j["dim"] = probe.dim();
  j["w1"] = std::vector<double>(probe.w1.data(), probe.w1.data() + probe.w1.size());
  j["b1"] = vec_json(probe.b1);
  j["w2"] = vec_json(probe.w2);
  j["b2"] = probe.b2;
  j["config"] = {{"learning_rate", probe.config.learning_rate},
                 {"epochs", probe.config.epochs},
                 {"batch_size", probe.config.batch_size},
                 {"seed", probe.config.seed},
                 {"cosine_decay", probe.config.cosine_decay}};
  j["final_loss"] = probe.final_loss;
  write_json(path, j);
}

LoadedProbe load_probe(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  LoadedProbe out;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format") != "driftkit-probe") throw Error(ErrorCode::SchemaError, "not a probe file");
    if (j.at("version").get<int>() != kProbeFormatVersion) {
      throw Error(ErrorCode::SchemaError, "unsupported probe version " + j.at("version").dump());
    }
    const auto& sj = j.at("scaler");
    out.scaler.means = json_vec(sj.at("means"));
    out.scaler.stds = json_vec(sj.at("stds"));
    out.scaler.zero_variance_mask = sj.at("mask").get<std::vector<bool>>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "logistic") {
      LogisticProbe p;
      p.weights = json_vec(j.at("weights"));
      p.bias = j.at("bias").get<double>();
      p.C = j.at("C").get<double>();
      const auto& cj = j.at("convergence");
      p.convergence = {cj.at("iterations").get<std::size_t>(), cj.at("gradient_norm").get<double>(),
                       cj.at("converged").get<bool>()};
      out.logistic = std::move(p);
    } else if (kind == "mlp") {
      MlpProbe p;
      const auto h = j.at("hidden").get<Eigen::Index>();
      const auto d = j.at("dim").get<Eigen::Index>();
      const auto w1 = j.at("w1").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w1.size()) != h * d) throw Error(ErrorCode::SchemaError, "w1 has wrong size");
      p.w1 = Eigen::Map<const Matrix>(w1.data(), h, d);
      p.b1 = json_vec(j.at("b1"));
      p.w2 = json_vec(j.at("w2"));
      p.b2 = j.at("b2").get<double>();
      const auto& cj = j.at("config");
      p.config = {cj.at("learning_rate").get<double>(), cj.at("epochs").get<std::size_t>(),
                  cj.at("batch_size").get<std::size_t>(), cj.at("seed").get<std::uint64_t>(),
                  cj.at("cosine_decay").get<bool>()};
      p.final_loss = j.at("final_loss").get<double>();
      out.mlp = std::move(p);
    } else {
      throw Error(ErrorCode::SchemaError, "unknown probe kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("malformed probe file: ") + e.what());
  }
  return out;
}

void write_direction(const std::filesystem::path& path, const Vector& direction) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  for (Eigen::Index i = 0; i < direction.size(); ++i) std::fprintf(f, "%.17g\n", direction[i]);
  if (std::fclose(f) != 0) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

Vector read_direction(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      values.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw Error(ErrorCode::SchemaError, "bad direction value '" + line + "'");
    }
  }
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace driftkit
