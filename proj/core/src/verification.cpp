#include "driftkit/verification.hpp"

#include "driftkit/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

namespace driftkit {

namespace {

std::string fmt(const char* spec, double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string opt(const std::optional<double>& v, const char* spec = "%.6f") { return v ? fmt(spec, *v) : ""; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

std::string cell_name(const CellInputs& c) { return c.corpus + "/" + c.method; }

}  // namespace

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Validated:
      return "Validated";
    case Verdict::Partial:
      return "Partial";
    case Verdict::Artifact:
      return "Artifact";
    case Verdict::NotApplicable:
      return "NotApplicable";
    case Verdict::BelowThreshold:
      return "BelowThreshold";
    case Verdict::Error:
      return "Error";
  }
  return "Error";
}

Verdict verdict_from_string(const std::string& name) {
  for (auto v : {Verdict::Validated, Verdict::Partial, Verdict::Artifact, Verdict::NotApplicable,
                 Verdict::BelowThreshold, Verdict::Error}) {
    if (to_string(v) == name) return v;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown verdict '" + name + "'");
}

bool VerdictRules::tf_dependent(const std::string& method) const {
  return std::find(tf_dependent_methods.begin(), tf_dependent_methods.end(), method) != tf_dependent_methods.end();
}

VerificationCell classify(const CellInputs& in, const VerdictRules& rules) {
  VerificationCell cell;
  cell.method = in.method;
  cell.corpus = in.corpus;
  cell.auroc = in.auroc;
  cell.ci_low = in.ci_low;
  cell.ci_high = in.ci_high;
  cell.null_mean = in.null_mean;
  if (in.error) {
    cell.verdict = Verdict::Error;
    cell.error = *in.error;
    return cell;
  }
  if (in.control_defined) {
    cell.txtemb_auroc = in.txtemb_auroc;
    if (in.txtemb_auroc) {
      cell.txtemb_gap = in.auroc - *in.txtemb_auroc;
    } else {
      cell.txtemb_gap = in.txtemb_gap;
    }
    if (cell.txtemb_gap) cell.flagged = std::abs(*cell.txtemb_gap) < rules.gap_threshold;
  }

  if (!(in.auroc > rules.auroc_trigger)) {
    cell.verdict = Verdict::BelowThreshold;
    return cell;
  }
  if (!in.control_defined) {
    cell.verdict = Verdict::NotApplicable;
    return cell;
  }
  if (!in.ci_low || !in.ci_high || !in.null_mean) {
    throw Error(ErrorCode::IncompleteChecks, cell_name(in) + ": AUROC " + fmt("%.3f", in.auroc) +
                                                 " needs a bootstrap CI and a permutation null");
  }
  if (!cell.txtemb_gap) {
    throw Error(ErrorCode::MissingControl, cell_name(in) + ": verdict needs the text-control gap");
  }
  const double gap = *cell.txtemb_gap;
  const bool ci_ok = *in.ci_low > rules.ci_threshold;
  if (ci_ok && gap > rules.gap_threshold) {
    cell.verdict = Verdict::Validated;
  } else if (cell.flagged) {
    cell.verdict = Verdict::Artifact;
  } else if (rules.tf_dependent(in.method) && gap <= rules.gap_threshold) {
    cell.verdict = Verdict::Artifact;
  } else if (ci_ok) {
    cell.verdict = Verdict::Partial;
  } else if (gap <= rules.gap_threshold) {
    cell.verdict = Verdict::Artifact;
  } else {
    cell.verdict = Verdict::BelowThreshold;
  }
  return cell;
}

VerificationReport verify_table(const std::vector<CellInputs>& cells, const VerdictRules& rules, bool strict) {
  VerificationReport report;
  std::vector<std::string> incomplete;
  for (const auto& in : cells) {
    try {
      report.rows.push_back(classify(in, rules));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::IncompleteChecks && e.code() != ErrorCode::MissingControl) throw;
      incomplete.push_back(cell_name(in));
      CellInputs failed = in;
      failed.error = e.what();
      report.rows.push_back(classify(failed, rules));
    }
  }
  if (strict && !incomplete.empty()) {
    std::string names;
    for (const auto& n : incomplete) names += (names.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::IncompleteChecks, "cells missing verification checks: " + names);
  }
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.corpus, a.method) < std::tie(b.corpus, b.method);
  });
  for (const auto& row : report.rows) ++report.totals[row.verdict];
  return report;
}

std::string format_verification_csv(const VerificationReport& report) {
  std::ostringstream out;
  out << "corpus,method,auroc,ci_low,ci_high,null_mean,txtemb_auroc,txtemb_gap,flagged,verdict,error\n";
  for (const auto& r : report.rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << r.corpus << ',' << r.method << ',' << fmt("%.6f", r.auroc) << ',' << opt(r.ci_low) << ','
        << opt(r.ci_high) << ',' << opt(r.null_mean) << ',' << opt(r.txtemb_auroc) << ',' << opt(r.txtemb_gap)
        << ',' << (r.flagged ? 1 : 0) << ',' << to_string(r.verdict) << ',' << err << '\n';
  }
  return out.str();
}

std::string format_verification_markdown(const VerificationReport& report) {
  std::vector<std::vector<std::string>> table;
  table.push_back({"Corpus", "Method", "AUROC", "95% CI", "Null", "TxTemb gap", "Verdict"});
  for (const auto& r : report.rows) {
    const std::string ci =
        r.ci_low && r.ci_high ? "[" + fmt("%.3f", *r.ci_low) + ", " + fmt("%.3f", *r.ci_high) + "]" : "-";
    const std::string gap = r.txtemb_gap ? fmt("%+.3f", *r.txtemb_gap) : "n/a";
    std::string verdict = to_string(r.verdict);
    if (r.flagged && r.verdict != Verdict::Error) verdict = "†" + verdict;
    table.push_back({r.corpus, r.method, std::isfinite(r.auroc) ? fmt("%.3f", r.auroc) : "-", ci, r.null_mean ? fmt("%.3f", *r.null_mean) : "-",
                     gap, verdict});
  }
  auto width = [](const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
  };
  std::vector<std::size_t> widths(table.front().size(), 3);
  for (const auto& row : table)
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], width(row[c]));
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& row) {
    out << '|';
    for (std::size_t c = 0; c < row.size(); ++c) out << ' ' << row[c] << std::string(widths[c] - width(row[c]), ' ') << " |";
    out << '\n';
  };
  emit(table.front());
  out << '|';
  for (auto w : widths) out << std::string(w + 2, '-') << '|';
  out << '\n';
  for (std::size_t i = 1; i < table.size(); ++i) emit(table[i]);
  if (!report.totals.empty()) {
    out << '\n';
    for (const auto& [v, n] : report.totals) out << "- " << to_string(v) << ": " << n << '\n';
  }
  return out.str();
}

void write_verification(const VerificationReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "verification.csv", format_verification_csv(report));
  write_text(out_dir / "verification.md", format_verification_markdown(report));
}

}  // namespace driftkit
