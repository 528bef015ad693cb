#include "driftkit/eval_stats.hpp"

#include "driftkit/error.hpp"
#include "driftkit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace driftkit {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::DimMismatch, "scores and labels differ in length");
  for (double s : scores) {
    if (!std::isfinite(s)) throw Error(ErrorCode::InvalidArgument, "scores must be finite");
  }
  std::size_t pos = 0;
  for (int y : labels) pos += (y == 1);
  if (pos == 0 || pos == labels.size()) throw Error(ErrorCode::SingleClass, "AUROC needs both classes");
}

// Core rank-sum routine; `order` is scratch space of size n.
double auroc_unchecked(std::span<const double> scores, std::span<const int> labels, std::vector<std::size_t>& order) {
  const std::size_t n = scores.size();
  order.resize(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the positive rank sum keeps midranks integral.
  std::uint64_t twice_rank_sum = 0;
  std::uint64_t n_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    std::uint64_t pos_in_group = 0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      pos_in_group += (labels[order[j]] == 1);
      ++j;
    }
    // ranks i+1 .. j, midrank (i+1+j)/2
    twice_rank_sum += pos_in_group * static_cast<std::uint64_t>(i + 1 + j);
    n_pos += pos_in_group;
    i = j;
  }
  const std::uint64_t n_neg = n - n_pos;
  // U = R - n_pos(n_pos+1)/2; in halves: 2U = 2R - n_pos(n_pos+1).
  const std::uint64_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
  return (static_cast<double>(twice_u) * 0.5) / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

bool single_class(std::span<const int> labels) {
  if (labels.empty()) return true;
  const int first = labels[0] == 1;
  for (int y : labels) {
    if ((y == 1) != first) return false;
  }
  return true;
}

}  // namespace

std::size_t ScoredSet::positive_count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

std::size_t ScoredSet::negative_count() const { return labels.size() - positive_count(); }

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  std::vector<std::size_t> order;
  return auroc_unchecked(scores, labels, order);
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double n_pos = 0;
  for (int y : labels) n_pos += (y == 1);
  const double n_neg = static_cast<double>(n) - n_pos;

  std::vector<RocPoint> curve{{0.0, 0.0}};
  double tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1;
      ++j;
    }
    curve.push_back({fp / n_neg, tp / n_pos});
    i = j;
  }
  return curve;
}

double trapezoid_area(const std::vector<RocPoint>& curve) {
  double area = 0.0;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    area += (curve[k].fpr - curve[k - 1].fpr) * (curve[k].tpr + curve[k - 1].tpr) * 0.5;
  }
  return area;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

BootstrapResult bootstrap_ci(std::span<const double> scores, std::span<const int> labels, std::size_t n_bootstrap,
                             std::uint64_t seed) {
  check_inputs(scores, labels);
  if (n_bootstrap == 0) throw Error(ErrorCode::InvalidArgument, "n_bootstrap must be positive");
  constexpr std::size_t kMaxRedrawsPerResample = 100;
  const std::size_t n = scores.size();

  BootstrapResult out;
  out.n_bootstrap = n_bootstrap;
  out.replicates.reserve(n_bootstrap);
  std::vector<double> s(n);
  std::vector<int> y(n);
  std::vector<std::size_t> scratch;
  for (std::size_t b = 0; b < n_bootstrap; ++b) {
    Rng rng(seed, b);
    std::size_t attempts = 0;
    for (;;) {
      for (std::size_t k = 0; k < n; ++k) {
        const auto idx = static_cast<std::size_t>(rng.below(n));
        s[k] = scores[idx];
        y[k] = labels[idx];
      }
      if (!single_class(y)) break;
      ++out.redraws;
      if (++attempts > kMaxRedrawsPerResample) {
        throw Error(ErrorCode::DegenerateResampling, "resample kept drawing a single class");
      }
    }
    out.replicates.push_back(auroc_unchecked(s, y, scratch));
  }
  if (2 * out.redraws > n_bootstrap + out.redraws) {
    throw Error(ErrorCode::DegenerateResampling, "more than half of bootstrap draws were single-class");
  }
  out.ci_low = percentile(out.replicates, 2.5);
  out.ci_high = percentile(out.replicates, 97.5);
  return out;
}

double permutation_null(std::span<const double> scores, std::span<const int> labels, std::size_t n_permutations,
                        std::uint64_t seed) {
  check_inputs(scores, labels);
  if (n_permutations == 0) throw Error(ErrorCode::InvalidArgument, "n_permutations must be positive");
  std::vector<int> y(labels.begin(), labels.end());
  std::vector<std::size_t> scratch;
  double total = 0.0;
  for (std::size_t p = 0; p < n_permutations; ++p) {
    std::copy(labels.begin(), labels.end(), y.begin());
    Rng rng(seed, p);
    rng.shuffle(std::span<int>(y));
    total += auroc_unchecked(scores, y, scratch);
  }
  return total / static_cast<double>(n_permutations);
}

ResampleReport resample_report(const ScoredSet& set, std::size_t n_bootstrap, std::size_t n_permutations,
                               std::uint64_t seed) {
  ResampleReport r;
  r.point_estimate = auroc(set);
  const auto boot = bootstrap_ci(set.scores, set.labels, n_bootstrap, seed);
  r.ci_low = boot.ci_low;
  r.ci_high = boot.ci_high;
  r.n_bootstrap = n_bootstrap;
  r.null_mean = permutation_null(set.scores, set.labels, n_permutations, seed);
  r.n_permutations = n_permutations;
  r.seed = seed;
  return r;
}

}  // namespace driftkit
