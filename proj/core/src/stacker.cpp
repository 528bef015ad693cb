#include "driftkit/stacker.hpp"

#include "driftkit/corpus.hpp"
#include "driftkit/error.hpp"
#include "driftkit/eval_stats.hpp"
#include "driftkit/probes.hpp"

#include <algorithm>
#include <memory>
#include <numeric>

namespace driftkit {

namespace {

Labels labels_at(const Labels& labels, const IndexList& rows) {
  Labels out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(labels[r]);
  return out;
}

// Columns = components, rows follow `rows`.
Matrix score_matrix(const std::vector<StackerComponent::RowScorer>& scorers, const IndexList& rows) {
  Matrix z(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(scorers.size()));
  for (std::size_t c = 0; c < scorers.size(); ++c) {
    const auto s = scorers[c](rows);
    if (s.size() != rows.size()) throw Error(ErrorCode::DimMismatch, "component returned the wrong number of scores");
    for (std::size_t i = 0; i < rows.size(); ++i) z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = s[i];
  }
  return z;
}

}  // namespace

StackerComponent fixed_component(std::string name, std::vector<double> scores) {
  auto shared = std::make_shared<const std::vector<double>>(std::move(scores));
  StackerComponent c;
  c.name = std::move(name);
  c.fit = [shared](const IndexList&) {
    return StackerComponent::RowScorer([shared](const IndexList& rows) {
      std::vector<double> out;
      out.reserve(rows.size());
      for (auto r : rows) out.push_back((*shared)[r]);
      return out;
    });
  };
  return c;
}

StackerResult nested_stacker(const std::vector<StackerComponent>& components, const Labels& labels,
                             std::size_t outer_folds, std::size_t inner_folds, std::uint64_t seed) {
  if (components.empty()) throw Error(ErrorCode::ComponentUnavailable, "stacker has no components");
  StackerResult result;
  for (const auto& c : components) result.components.push_back(c.name);

  IndexList all(labels.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto outer = stratified_folds(all, labels, outer_folds, seed);

  std::vector<double> pooled(labels.size(), 0.0);
  std::vector<std::vector<double>> pooled_components(components.size(), std::vector<double>(labels.size(), 0.0));
  for (std::size_t k = 0; k < outer_folds; ++k) {
    const auto [train, test] = fold_partition(all, outer, k);
    const Labels train_y = labels_at(labels, train);

    // Out-of-fold component scores over the outer-train rows.
    const auto inner = stratified_folds(train, labels, inner_folds, seed + 1 + k);
    Matrix oof(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(components.size()));
    for (std::size_t j = 0; j < inner_folds; ++j) {
      std::vector<std::size_t> fit_pos, held_pos;
      for (std::size_t i = 0; i < train.size(); ++i) (inner[i] == j ? held_pos : fit_pos).push_back(i);
      IndexList fit_rows, held_rows;
      for (auto p : fit_pos) fit_rows.push_back(train[p]);
      for (auto p : held_pos) held_rows.push_back(train[p]);
      std::vector<StackerComponent::RowScorer> scorers;
      for (const auto& c : components) scorers.push_back(c.fit(fit_rows));
      const Matrix z = score_matrix(scorers, held_rows);
      for (std::size_t i = 0; i < held_pos.size(); ++i) oof.row(static_cast<Eigen::Index>(held_pos[i])) = z.row(static_cast<Eigen::Index>(i));
    }

    // Meta model, C chosen over the same inner folds.
    StackerFold fold;
    const CvSelection cv = cv_select_C(oof, train_y, inner);
    fold.meta_C = cv.C;
    const Standardizer scaler = fit_standardizer(oof);
    const LogisticProbe meta = fit_logistic(scaler.transform(oof), train_y, cv.C);

    std::vector<StackerComponent::RowScorer> scorers;
    for (const auto& c : components) scorers.push_back(c.fit(train));
    const Matrix z_test = score_matrix(scorers, test);
    const Vector s = decision_function(meta, scaler.transform(z_test));

    const Labels test_y = labels_at(labels, test);
    fold.test_rows = test;
    fold.test_scores.assign(s.data(), s.data() + s.size());
    fold.auroc = auroc(fold.test_scores, test_y);
    for (Eigen::Index c = 0; c < z_test.cols(); ++c) {
      std::vector<double> col(test.size());
      for (std::size_t i = 0; i < test.size(); ++i) {
        col[i] = z_test(static_cast<Eigen::Index>(i), c);
        pooled_components[static_cast<std::size_t>(c)][test[i]] = col[i];
      }
      fold.component_auroc.push_back(auroc(col, test_y));
    }
    for (std::size_t i = 0; i < test.size(); ++i) pooled[test[i]] = fold.test_scores[i];
    result.folds.push_back(std::move(fold));
  }
  result.pooled_auroc = auroc(pooled, labels);
  double sum = 0.0;
  for (const auto& f : result.folds) sum += f.auroc;
  result.mean_fold_auroc = sum / static_cast<double>(result.folds.size());
  for (const auto& pc : pooled_components) result.component_auroc.push_back(auroc(pc, labels));
  return result;
}

StackerResult run_stacker(const CorpusData& data, const ExperimentConfig& config, LeakAudit* audit) {
  std::vector<StackerComponent> components;
  std::vector<std::pair<std::string, std::string>> unavailable;
  for (const auto& name : config.stacker.components) {
    if (method_requires_tf(name) && data.format != CorpusFormat::TeacherForced) {
      unavailable.emplace_back(name, "requires a teacher-forced corpus");
      continue;
    }
    // Probe the method once so broken components are dropped up front.
    try {
      (void)method_feature_dim(name, data);
    } catch (const Error& e) {
      unavailable.emplace_back(name, e.what());
      continue;
    }
    StackerComponent c;
    c.name = name;
    c.fit = [&data, &config, name, audit](const IndexList& fit_rows) {
      MethodContext ctx;
      ctx.mlp = config.mlp;
      ctx.n_folds = config.split.n_folds;
      ctx.seed = config.seed;
      std::vector<std::string> fit_ids;
      ctx.consumed = &fit_ids;
      Scorer scorer = fit_method(name, data, fit_rows, ctx);
      return StackerComponent::RowScorer([scorer, &data, audit, name, fit_ids](const IndexList& rows) {
        if (audit) {
          std::vector<std::string> test_ids;
          for (auto r : rows) test_ids.push_back(data.corpus.examples[r].example_id);
          audit->record({data.name, "stacker:" + name, fit_ids, std::move(test_ids)});
        }
        return scorer(data, rows);
      });
    };
    components.push_back(std::move(c));
  }
  if (components.empty()) throw Error(ErrorCode::ComponentUnavailable, "no stacker component is available on '" + data.name + "'");
  StackerResult r = nested_stacker(components, data.labels(), config.stacker.outer_folds, config.stacker.inner_folds,
                                   config.seed);
  r.corpus = data.name;
  r.unavailable = std::move(unavailable);
  return r;
}

}  // namespace driftkit
