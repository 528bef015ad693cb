#pragma once

#include "driftkit/activation_cache.hpp"
#include "driftkit/config.hpp"
#include "driftkit/corpus.hpp"
#include "driftkit/features.hpp"
#include "driftkit/probes.hpp"
#include "driftkit/verification.hpp"

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace driftkit {

/// A corpus with its cache records aligned to corpus order.
struct CorpusData {
  std::string name;
  CorpusFormat format = CorpusFormat::TeacherForced;
  Corpus corpus;
  std::vector<ActivationRecord> records;
  CacheHeader header;
  LayerTapSpec taps;

  Labels labels() const { return corpus.labels(); }
};

/// Reorders `records` to match the corpus; AlignmentError when the id sets
/// differ.
CorpusData align(Corpus corpus, std::vector<ActivationRecord> records, CacheHeader header,
                 const std::vector<double>& tap_fractions);
CorpusData load_corpus_data(const CorpusEntry& entry, const std::vector<double>& tap_fractions);

/// Records the example ids consumed by every fit and the ids it was scored on.
class LeakAudit {
 public:
  struct Entry {
    std::string corpus;
    std::string method;
    std::vector<std::string> fit_ids;
    std::vector<std::string> test_ids;
  };

  void record(Entry entry);
  std::vector<Entry> entries() const;
  /// Number of (fit, test) id collisions summed over all entries.
  std::size_t violations() const;

 private:
  mutable std::mutex mutex_;
  std::vector<Entry> entries_;
};

struct MethodContext {
  MlpConfig mlp;
  std::size_t n_folds = 5;
  std::uint64_t seed = 42;
  /// Approach A strategies; empty = all present in the cache.
  std::vector<Perturbation> strategies;
  /// When set, every example id read by a fit is appended here.
  std::vector<std::string>* consumed = nullptr;
};

/// Fitted detector. Scores rows of any corpus with compatible features;
/// larger score = more likely hallucinated.
using Scorer = std::function<std::vector<double>(const CorpusData& data, const IndexList& rows)>;

bool method_requires_tf(const std::string& method);

/// Fits `method` on `train` rows of `data`.
Scorer fit_method(const std::string& method, const CorpusData& data, const IndexList& train, const MethodContext& ctx);

/// Feature width of a method on a corpus, used to check transfer compatibility.
std::size_t method_feature_dim(const std::string& method, const CorpusData& data);

struct GridCell {
  std::string corpus;
  CorpusFormat format = CorpusFormat::TeacherForced;
  std::string method;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  VerificationCell verification;
  /// Test-split scores and labels (for ROC plot data).
  std::vector<double> test_scores;
  Labels test_labels;
};

struct TxtembControl {
  bool defined = false;
  double auroc = 0.5;
  bool flipped = false;
};

/// Orientation-corrected text-control AUROC; undefined when any example
/// lacks a reference text.
TxtembControl txtemb_control(const Corpus& corpus);

struct GridResult {
  /// Sorted by corpus, then method.
  std::vector<GridCell> cells;
  std::map<std::string, TxtembControl> controls;
};

/// Every (method, corpus) cell. Cell failures are recorded on the cell.
GridResult run_grid(const std::vector<CorpusData>& corpora, const ExperimentConfig& config, LeakAudit* audit = nullptr);
GridResult run_grid(const ExperimentConfig& config, LeakAudit* audit = nullptr);

struct TransferMatrix {
  std::string method;
  std::vector<std::string> corpora;
  /// values[i][j]: trained on corpora[i], tested on corpora[j].
  std::vector<std::vector<double>> values;
};

TransferMatrix run_transfer(const std::vector<CorpusData>& corpora, const ExperimentConfig& config,
                            const std::string& method, LeakAudit* audit = nullptr);

struct BudgetPoint {
  std::string corpus;
  std::string method;
  /// kBudgetFull for the whole training split.
  std::size_t requested = 0;
  std::size_t used = 0;
  /// The request exceeded the training split and was clamped.
  bool clamped = false;
  double mean = 0.0;
  /// Sample standard deviation over seeds.
  double stddev = 0.0;
  std::vector<double> per_seed;
};

std::vector<BudgetPoint> run_budget(const std::vector<CorpusData>& corpora, const ExperimentConfig& config,
                                    const std::string& method, LeakAudit* audit = nullptr);

struct AblationRow {
  std::string corpus;
  std::string label;
  double auroc = 0.5;
  std::string error;
};

/// One single-tap row per tap, then the combined DRIFT row.
std::vector<AblationRow> run_layer_ablation(const std::vector<CorpusData>& corpora, const ExperimentConfig& config,
                                            LeakAudit* audit = nullptr);
/// Approach A with each strategy alone, then all of them.
std::vector<AblationRow> run_perturb_ablation(const std::vector<CorpusData>& corpora, const ExperimentConfig& config,
                                              LeakAudit* audit = nullptr);

std::vector<CorpusData> load_all(const ExperimentConfig& config);

/// Runs `jobs` on `threads` workers; results come back in job order.
template <typename T>
std::vector<T> run_jobs(const std::vector<std::function<T()>>& jobs, std::size_t threads);

}  // namespace driftkit

#include "driftkit/detail/work_queue.hpp"
