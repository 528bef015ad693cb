#include "driftkit/harness.hpp"

#include "driftkit/error.hpp"
#include "driftkit/eval_stats.hpp"
#include "driftkit/txtemb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace driftkit {

namespace {

using RowFn = std::function<Vector(const ActivationRecord&)>;

Labels labels_at(const Labels& labels, const IndexList& rows) {
  Labels out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(labels[r]);
  return out;
}

std::vector<std::string> ids_at(const CorpusData& data, const IndexList& rows) {
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(data.corpus.examples[r].example_id);
  return out;
}

Matrix feature_rows(const CorpusData& data, const IndexList& rows, const RowFn& fn) {
  Matrix out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Vector v = fn(data.records[rows[i]]);
    if (i == 0) out.resize(static_cast<Eigen::Index>(rows.size()), v.size());
    if (v.size() != out.cols()) throw Error(ErrorCode::DimMismatch, "feature width varies across records");
    if (!v.allFinite()) {
      throw Error(ErrorCode::NanDetected, "non-finite feature for '" + data.records[rows[i]].example_id + "'");
    }
    out.row(static_cast<Eigen::Index>(i)) = v.transpose();
  }
  return out;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

void consume(const MethodContext& ctx, const CorpusData& data, const IndexList& rows) {
  if (!ctx.consumed) return;
  for (auto r : rows) ctx.consumed->push_back(data.corpus.examples[r].example_id);
}

// Standardize + CV logistic on a per-record feature function.
Scorer linear_method(RowFn fn, const CorpusData& data, const IndexList& train, const MethodContext& ctx) {
  const Matrix x = feature_rows(data, train, fn);
  consume(ctx, data, train);
  auto pipe = std::make_shared<LinearPipeline>(fit_linear_pipeline(x, labels_at(data.labels(), train), ctx.n_folds, ctx.seed));
  return [pipe, fn](const CorpusData& d, const IndexList& rows) {
    return to_std(pipe->decision_function(feature_rows(d, rows, fn)));
  };
}

struct MlpBundle {
  Standardizer scaler;
  MlpProbe probe;
};

Scorer mlp_method(RowFn fn, const CorpusData& data, const IndexList& train, const std::vector<double>& targets,
                  const MethodContext& ctx) {
  const Matrix raw = feature_rows(data, train, fn);
  consume(ctx, data, train);
  auto bundle = std::make_shared<MlpBundle>();
  bundle->scaler = fit_standardizer(raw);
  bundle->probe = fit_mlp_soft(bundle->scaler.transform(raw), targets, ctx.mlp);
  return [bundle, fn](const CorpusData& d, const IndexList& rows) {
    return to_std(decision_function(bundle->probe, bundle->scaler.transform(feature_rows(d, rows, fn))));
  };
}

Vector flatten(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

Vector mean_sample_state(const ActivationRecord& rec) {
  Vector acc = flat_pooled(rec, 0);
  for (std::size_t s = 1; s < rec.pooled.size(); ++s) acc += flat_pooled(rec, s);
  return acc / static_cast<double>(rec.pooled.size());
}

Vector tap_state(const ActivationRecord& rec, std::size_t position) {
  if (rec.pooled.empty() || position >= static_cast<std::size_t>(rec.pooled[0].rows())) {
    throw Error(ErrorCode::MissingTap, "record '" + rec.example_id + "' has no tap position " + std::to_string(position));
  }
  return rec.pooled[0].row(static_cast<Eigen::Index>(position)).transpose().cast<double>();
}

double entropy_value(const Example& ex, const ActivationRecord& rec) {
  if (ex.entropy_target) return *ex.entropy_target;
  // Without a sampled-entropy target, fall back to the negative mean token
  // log-probability.
  return logprob_stats(rec)[4];
}

double std_dev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

MethodContext context_for(const ExperimentConfig& config, std::uint64_t seed) {
  MethodContext ctx;
  ctx.mlp = config.mlp;
  ctx.mlp.seed = seed;
  ctx.n_folds = config.split.n_folds;
  ctx.seed = seed;
  return ctx;
}

// Fit on `train`, score `test`; records the audit entry.
std::vector<double> fit_and_score(const std::string& method, const CorpusData& fit_data, const IndexList& train,
                                  const CorpusData& test_data, const IndexList& test, MethodContext ctx,
                                  LeakAudit* audit) {
  std::vector<std::string> fit_ids;
  ctx.consumed = &fit_ids;
  Scorer scorer = fit_method(method, fit_data, train, ctx);
  if (audit && &fit_data == &test_data) audit->record({fit_data.name, method, std::move(fit_ids), ids_at(test_data, test)});
  return scorer(test_data, test);
}


}  // namespace

// ---- Alignment ----

CorpusData align(Corpus corpus, std::vector<ActivationRecord> records, CacheHeader header,
                 const std::vector<double>& tap_fractions) {
  CorpusData data;
  data.name = corpus.name;
  data.format = corpus.format;
  data.header = std::move(header);
  if (records.size() != corpus.size()) {
    throw Error(ErrorCode::AlignmentError, "corpus '" + corpus.name + "' has " + std::to_string(corpus.size()) +
                                               " examples but the cache has " + std::to_string(records.size()));
  }
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!by_id.emplace(records[i].example_id, i).second) {
      throw Error(ErrorCode::AlignmentError, "duplicate cache id '" + records[i].example_id + "'");
    }
  }
  data.records.reserve(records.size());
  for (const auto& ex : corpus.examples) {
    auto it = by_id.find(ex.example_id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::AlignmentError, "example '" + ex.example_id + "' missing from the cache");
    }
    data.records.push_back(std::move(records[it->second]));
  }
  data.taps = resolve_taps(tap_fractions, data.header.total_layers);
  if (data.taps.resolved_indices != data.header.tap_layers) {
    std::ostringstream msg;
    msg << "configured taps resolve to layers";
    for (auto l : data.taps.resolved_indices) msg << ' ' << l;
    msg << " but the cache holds";
    for (auto l : data.header.tap_layers) msg << ' ' << l;
    throw Error(ErrorCode::AlignmentError, msg.str());
  }
  data.corpus = std::move(corpus);
  return data;
}

CorpusData load_corpus_data(const CorpusEntry& entry, const std::vector<double>& tap_fractions) {
  Corpus corpus = load_corpus(entry.corpus_path, entry.format, entry.name);
  CacheContents cache = read_cache(entry.cache_path);
  return align(std::move(corpus), std::move(cache.records), std::move(cache.header), tap_fractions);
}

std::vector<CorpusData> load_all(const ExperimentConfig& config) {
  std::vector<CorpusData> out;
  for (const auto& entry : config.corpora) out.push_back(load_corpus_data(entry, config.tap_fractions));
  return out;
}

// ---- Leak audit ----

void LeakAudit::record(Entry entry) {
  std::lock_guard lock(mutex_);
  entries_.push_back(std::move(entry));
}

std::vector<LeakAudit::Entry> LeakAudit::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::size_t LeakAudit::violations() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& e : entries_) {
    const std::set<std::string> fit(e.fit_ids.begin(), e.fit_ids.end());
    for (const auto& id : e.test_ids) n += fit.count(id);
  }
  return n;
}

// ---- Methods ----

bool method_requires_tf(const std::string& method) { return method == "approach_b" || method == "approach_f"; }

Scorer fit_method(const std::string& method, const CorpusData& data, const IndexList& train, const MethodContext& ctx) {
  if (train.empty()) throw Error(ErrorCode::TooFewRows, "empty training split");
  const Labels y = labels_at(data.labels(), train);

  if (method == "drift") {
    return linear_method([](const ActivationRecord& r) { return drift_features(r); }, data, train, ctx);
  }
  if (method == "drift_concat") {
    return linear_method([](const ActivationRecord& r) { return drift_concat_features(r); }, data, train, ctx);
  }
  if (method == "act") {
    return linear_method([](const ActivationRecord& r) { return flat_pooled(r); }, data, train, ctx);
  }
  if (method == "drift_logp") {
    return linear_method([](const ActivationRecord& r) { return logprob_stats(r); }, data, train, ctx);
  }
  if (method == "approach_d") {
    return linear_method([](const ActivationRecord& r) { return variance_features(r); }, data, train, ctx);
  }
  if (method == "approach_f") {
    return linear_method([](const ActivationRecord& r) { return answer_expect_features(r); }, data, train, ctx);
  }
  if (method == "saplma") {
    // Layer chosen by the best inner-CV AUROC; ties go to the shallower tap.
    consume(ctx, data, train);
    std::shared_ptr<LinearPipeline> best;
    std::size_t best_tap = 0;
    double best_cv = -1.0;
    for (std::size_t p = 0; p < data.taps.size(); ++p) {
      const RowFn fn = [p](const ActivationRecord& r) { return saplma_features(r, p); };
      auto pipe = std::make_shared<LinearPipeline>(fit_linear_pipeline(feature_rows(data, train, fn), y, ctx.n_folds, ctx.seed));
      double cv = -1.0;
      for (const auto& [c, a] : pipe->cv.table) cv = std::max(cv, a);
      if (cv > best_cv) {
        best_cv = cv;
        best = pipe;
        best_tap = p;
      }
    }
    return [best, best_tap](const CorpusData& d, const IndexList& rows) {
      return to_std(best->decision_function(
          feature_rows(d, rows, [best_tap](const ActivationRecord& r) { return saplma_features(r, best_tap); })));
    };
  }
  if (method == "hallushift") {
    return [](const CorpusData& d, const IndexList& rows) {
      std::vector<double> out;
      for (auto r : rows) out.push_back(hallushift_score(d.records[r], d.taps));
      return out;
    };
  }
  if (method == "approach_a") {
    const auto strategies = ctx.strategies;
    const RowFn fn = [strategies](const ActivationRecord& r) { return flatten(perturb_delta_features(r, strategies)); };
    std::vector<double> targets(y.begin(), y.end());
    if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0) {
      throw Error(ErrorCode::SingleClass, "probe training needs both classes");
    }
    return mlp_method(fn, data, train, targets, ctx);
  }
  if (method == "approach_c") {
    std::vector<double> targets;
    for (auto r : train) targets.push_back(entropy_value(data.corpus.examples[r], data.records[r]));
    const double top = *std::max_element(targets.begin(), targets.end());
    for (auto& t : targets) t = top > 0.0 ? std::clamp(t / top, 0.0, 1.0) : 0.0;
    return mlp_method(mean_sample_state, data, train, targets, ctx);
  }
  if (method == "approach_b") {
    consume(ctx, data, train);
    std::vector<const ActivationRecord*> fit;
    for (auto r : train) fit.push_back(&data.records[r]);
    auto dir = std::make_shared<CaaDirection>(caa_direction(fit));
    if (dir->degenerate) throw Error(ErrorCode::DegenerateDirection, "paired differences cancel to zero");
    // The direction points from hallucinated toward correct.
    return [dir](const CorpusData& d, const IndexList& rows) {
      std::vector<double> out;
      for (auto r : rows) out.push_back(-caa_score(d.records[r], *dir));
      return out;
    };
  }
  if (method == "txtemb") {
    consume(ctx, data, train);
    std::vector<std::string> texts;
    for (auto r : train) {
      const auto& ex = data.corpus.examples[r];
      if (!ex.reference_text) throw Error(ErrorCode::MissingReference, "example '" + ex.example_id + "' has no reference_text");
      texts.push_back(*ex.reference_text);
      if (ex.hallucinated_text) texts.push_back(*ex.hallucinated_text);
      texts.push_back(ex.response);
    }
    auto model = std::make_shared<TfidfModel>(fit_tfidf(texts));
    return [model](const CorpusData& d, const IndexList& rows) {
      std::vector<double> out;
      for (auto r : rows) {
        const auto& ex = d.corpus.examples[r];
        if (!ex.reference_text) throw Error(ErrorCode::MissingReference, "example '" + ex.example_id + "' has no reference_text");
        out.push_back(-txtemb_score(*model, ex.response, *ex.reference_text));
      }
      return out;
    };
  }
  throw Error(ErrorCode::ConfigError, "unknown method '" + method + "'");
}

std::size_t method_feature_dim(const std::string& method, const CorpusData& data) {
  if (data.records.empty()) return 0;
  const auto& r = data.records.front();
  if (method == "drift") return static_cast<std::size_t>(drift_features(r).size());
  if (method == "drift_concat") return static_cast<std::size_t>(drift_concat_features(r).size());
  if (method == "act" || method == "approach_c") return static_cast<std::size_t>(flat_pooled(r).size());
  if (method == "drift_logp") return 5;
  if (method == "approach_d") return static_cast<std::size_t>(variance_features(r).size());
  if (method == "approach_f") return static_cast<std::size_t>(answer_expect_features(r).size());
  if (method == "saplma") return data.header.hidden_dim;
  if (method == "approach_a") return static_cast<std::size_t>(perturb_delta_features(r).size());
  if (method == "approach_b") return static_cast<std::size_t>(flat_pooled(r).size());
  return 1;
}

// ---- Grid ----

TxtembControl txtemb_control(const Corpus& corpus) {
  TxtembControl c;
  for (const auto& ex : corpus.examples) {
    if (!ex.reference_text) return c;
  }
  const auto res = txtemb_audit(corpus);
  c.defined = true;
  c.auroc = res.auroc;
  c.flipped = res.flipped;
  return c;
}

namespace {

GridCell run_cell(const CorpusData& data, const Split& split, const TxtembControl& control, const std::string& method,
                  const ExperimentConfig& config, LeakAudit* audit) {
  GridCell cell;
  cell.corpus = data.name;
  cell.format = data.format;
  cell.method = method;
  cell.n_train = split.train.size();
  cell.n_test = split.test.size();
  cell.verification.corpus = data.name;
  cell.verification.method = method;
  cell.verification.auroc = std::numeric_limits<double>::quiet_NaN();

  if (method_requires_tf(method) && data.format != CorpusFormat::TeacherForced) {
    cell.verification.verdict = Verdict::NotApplicable;
    cell.verification.error = "requires a teacher-forced corpus";
    return cell;
  }
  CellInputs in;
  in.method = method;
  in.corpus = data.name;
  try {
    cell.test_scores = fit_and_score(method, data, split.train, data, split.test, context_for(config, config.seed), audit);
    cell.test_labels = labels_at(data.labels(), split.test);
    const ScoredSet set{cell.test_scores, cell.test_labels};
    const auto rep = resample_report(set, config.stats.n_bootstrap, config.stats.n_permutations, config.seed);
    in.auroc = rep.point_estimate;
    in.ci_low = rep.ci_low;
    in.ci_high = rep.ci_high;
    in.null_mean = rep.null_mean;
    // The text control cannot be checked against itself.
    in.control_defined = control.defined && method != "txtemb";
    if (in.control_defined) in.txtemb_auroc = control.auroc;
  } catch (const Error& e) {
    in.error = e.what();
  }
  cell.verification = classify(in, config.rules);
  return cell;
}

}  // namespace

GridResult run_grid(const std::vector<CorpusData>& corpora, const ExperimentConfig& config, LeakAudit* audit) {
  GridResult result;
  std::vector<Split> splits;
  for (const auto& data : corpora) {
    splits.push_back(stratified_split(data.labels(), config.split));
    TxtembControl control;
    try {
      control = txtemb_control(data.corpus);
    } catch (const Error&) {
      control.defined = false;
    }
    result.controls[data.name] = control;
  }
  std::vector<std::function<GridCell()>> jobs;
  for (std::size_t c = 0; c < corpora.size(); ++c) {
    for (const auto& method : config.methods) {
      jobs.push_back([&, c, method] {
        return run_cell(corpora[c], splits[c], result.controls.at(corpora[c].name), method, config, audit);
      });
    }
  }
  result.cells = run_jobs(jobs, config.threads);
  std::stable_sort(result.cells.begin(), result.cells.end(), [](const GridCell& a, const GridCell& b) {
    return std::tie(a.corpus, a.method) < std::tie(b.corpus, b.method);
  });
  return result;
}

GridResult run_grid(const ExperimentConfig& config, LeakAudit* audit) { return run_grid(load_all(config), config, audit); }

// ---- Transfer ----

TransferMatrix run_transfer(const std::vector<CorpusData>& corpora, const ExperimentConfig& config,
                            const std::string& method, LeakAudit* audit) {
  if (corpora.empty()) throw Error(ErrorCode::InvalidArgument, "transfer needs at least one corpus");
  std::vector<std::size_t> order(corpora.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return corpora[a].name < corpora[b].name; });

  const auto& ref = corpora[order.front()];
  for (const auto& c : corpora) {
    if (c.header.hidden_dim != ref.header.hidden_dim || c.taps.size() != ref.taps.size() ||
        method_feature_dim(method, c) != method_feature_dim(method, ref)) {
      throw Error(ErrorCode::DimIncompatible, "corpora '" + ref.name + "' and '" + c.name + "' have incompatible features");
    }
    if (method_requires_tf(method) && c.format != CorpusFormat::TeacherForced) {
      throw Error(ErrorCode::ComponentUnavailable, method + " needs teacher-forced corpora; '" + c.name + "' is not");
    }
  }
  TransferMatrix tm;
  tm.method = method;
  std::vector<Split> splits;
  for (auto i : order) {
    tm.corpora.push_back(corpora[i].name);
    splits.push_back(stratified_split(corpora[i].labels(), config.split));
  }
  const std::size_t n = order.size();
  tm.values.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& train_data = corpora[order[i]];
    MethodContext ctx = context_for(config, config.seed);
    std::vector<std::string> fit_ids;
    ctx.consumed = &fit_ids;
    Scorer scorer = fit_method(method, train_data, splits[i].train, ctx);
    for (std::size_t j = 0; j < n; ++j) {
      const auto& test_data = corpora[order[j]];
      if (audit && i == j) audit->record({train_data.name, method, fit_ids, ids_at(test_data, splits[j].test)});
      const auto scores = scorer(test_data, splits[j].test);
      tm.values[i][j] = auroc(scores, labels_at(test_data.labels(), splits[j].test));
    }
  }
  return tm;
}

// ---- Budget ----

std::vector<BudgetPoint> run_budget(const std::vector<CorpusData>& corpora, const ExperimentConfig& config,
                                    const std::string& method, LeakAudit* audit) {
  std::vector<BudgetPoint> out;
  std::vector<std::size_t> order(corpora.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return corpora[a].name < corpora[b].name; });
  for (auto ci : order) {
    const auto& data = corpora[ci];
    const Split split = stratified_split(data.labels(), config.split);
    const Labels labels = data.labels();
    const Labels test_labels = labels_at(labels, split.test);
    for (auto requested : config.budget.sizes) {
      BudgetPoint pt;
      pt.corpus = data.name;
      pt.method = method;
      pt.requested = requested;
      pt.clamped = requested != kBudgetFull && requested > split.train.size();
      pt.used = std::min(requested, split.train.size());
      std::vector<std::function<double()>> jobs;
      for (std::size_t s = 0; s < config.budget.seeds; ++s) {
        jobs.push_back([&, s, used = pt.used] {
          const std::uint64_t seed = config.seed + s;
          const IndexList rows =
              used == split.train.size() ? split.train : stratified_subsample(split.train, labels, used, seed);
          const auto scores = fit_and_score(method, data, rows, data, split.test, context_for(config, seed), audit);
          return auroc(scores, test_labels);
        });
      }
      pt.per_seed = run_jobs(jobs, config.threads);
      pt.mean = std::accumulate(pt.per_seed.begin(), pt.per_seed.end(), 0.0) / static_cast<double>(pt.per_seed.size());
      pt.stddev = std_dev(pt.per_seed);
      out.push_back(std::move(pt));
    }
  }
  return out;
}

// ---- Ablations ----

namespace {

std::string tap_label(const LayerTapSpec& taps, std::size_t p) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "tap_%.2f_layer_%u", taps.fractions[p], static_cast<unsigned>(taps.resolved_indices[p]));
  return buf;
}

}  // namespace

std::vector<AblationRow> run_layer_ablation(const std::vector<CorpusData>& corpora, const ExperimentConfig& config,
                                            LeakAudit* audit) {
  std::vector<AblationRow> out;
  std::vector<std::size_t> order(corpora.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return corpora[a].name < corpora[b].name; });
  for (auto ci : order) {
    const auto& data = corpora[ci];
    if (data.taps.size() < 2) throw Error(ErrorCode::SingleTap, "layer ablation needs at least 2 taps");
    const Split split = stratified_split(data.labels(), config.split);
    const Labels test_labels = labels_at(data.labels(), split.test);
    const MethodContext ctx = context_for(config, config.seed);
    for (std::size_t p = 0; p < data.taps.size(); ++p) {
      AblationRow row{data.name, tap_label(data.taps, p), 0.5, {}};
      try {
        const RowFn fn = [p](const ActivationRecord& r) { return tap_state(r, p); };
        std::vector<std::string> fit_ids;
        MethodContext tap_ctx = ctx;
        tap_ctx.consumed = &fit_ids;
        Scorer s = linear_method(fn, data, split.train, tap_ctx);
        if (audit) audit->record({data.name, row.label, std::move(fit_ids), ids_at(data, split.test)});
        row.auroc = auroc(s(data, split.test), test_labels);
      } catch (const Error& e) {
        row.error = e.what();
      }
      out.push_back(std::move(row));
    }
    AblationRow all{data.name, "drift_all_taps", 0.5, {}};
    try {
      all.auroc = auroc(fit_and_score("drift", data, split.train, data, split.test, ctx, audit), test_labels);
    } catch (const Error& e) {
      all.error = e.what();
    }
    out.push_back(std::move(all));
  }
  return out;
}

std::vector<AblationRow> run_perturb_ablation(const std::vector<CorpusData>& corpora, const ExperimentConfig& config,
                                              LeakAudit* audit) {
  std::vector<AblationRow> out;
  std::vector<std::size_t> order(corpora.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return corpora[a].name < corpora[b].name; });
  for (auto ci : order) {
    const auto& data = corpora[ci];
    const Split split = stratified_split(data.labels(), config.split);
    const Labels test_labels = labels_at(data.labels(), split.test);
    std::vector<std::pair<std::string, std::vector<Perturbation>>> variants;
    for (auto p : data.header.perturbations()) variants.push_back({to_string(p), {p}});
    variants.push_back({"all", {}});
    for (const auto& [label, strategies] : variants) {
      AblationRow row{data.name, label, 0.5, {}};
      try {
        MethodContext ctx = context_for(config, config.seed);
        ctx.strategies = strategies;
        row.auroc = auroc(fit_and_score("approach_a", data, split.train, data, split.test, ctx, audit), test_labels);
      } catch (const Error& e) {
        row.error = e.what();
      }
      out.push_back(std::move(row));
    }
  }
  return out;
}

}  // namespace driftkit
