#include "driftkit/report.hpp"

#include "driftkit/error.hpp"
#include "driftkit/eval_stats.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace driftkit {

namespace {

std::string num(double v, const char* spec = "%.6f") {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : ""; }

std::string csv_text(std::string s) {
  for (auto& c : s) {
    if (c == ',') c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::string budget_label(std::size_t n) { return n == kBudgetFull ? "full" : std::to_string(n); }

std::filesystem::path write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
  return path;
}

std::string markdown_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w(rows.front().size(), 3);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) w[c] = std::max(w[c], r[c].size());
  std::ostringstream out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << '|';
    for (std::size_t c = 0; c < rows[i].size(); ++c) out << ' ' << rows[i][c] << std::string(w[c] - rows[i][c].size(), ' ') << " |";
    out << '\n';
    if (i == 0) {
      out << '|';
      for (auto x : w) out << std::string(x + 2, '-') << '|';
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace

bool RunResults::empty() const noexcept {
  return !grid && !transfer && budget.empty() && layer_ablation.empty() && perturb_ablation.empty() && stacker.empty();
}

ReportFormat report_format_from_string(const std::string& name) {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "markdown" || name == "md") return ReportFormat::Markdown;
  if (name == "plotdata") return ReportFormat::PlotData;
  throw Error(ErrorCode::InvalidArgument, "unknown report format '" + name + "' (csv, markdown, plotdata)");
}

VerificationReport verification_from_grid(const GridResult& grid) {
  VerificationReport rep;
  for (const auto& c : grid.cells) {
    rep.rows.push_back(c.verification);
    ++rep.totals[c.verification.verdict];
  }
  return rep;
}

std::string format_cells_csv(const GridResult& grid) {
  std::ostringstream out;
  out << "corpus,format,method,n_train,n_test,auroc,ci_low,ci_high,null_mean,txtemb_auroc,txtemb_gap,flagged,verdict,"
         "error\n";
  for (const auto& c : grid.cells) {
    const auto& v = c.verification;
    out << c.corpus << ',' << to_string(c.format) << ',' << c.method << ',' << c.n_train << ',' << c.n_test << ','
        << num(v.auroc) << ',' << num(v.ci_low) << ',' << num(v.ci_high) << ',' << num(v.null_mean) << ','
        << num(v.txtemb_auroc) << ',' << num(v.txtemb_gap) << ',' << (v.flagged ? 1 : 0) << ',' << to_string(v.verdict)
        << ',' << csv_text(v.error) << '\n';
  }
  return out.str();
}

std::string format_transfer_csv(const TransferMatrix& t) {
  std::ostringstream out;
  out << "method,train_corpus,test_corpus,auroc,diagonal\n";
  for (std::size_t i = 0; i < t.corpora.size(); ++i)
    for (std::size_t j = 0; j < t.corpora.size(); ++j)
      out << t.method << ',' << t.corpora[i] << ',' << t.corpora[j] << ',' << num(t.values[i][j]) << ','
          << (i == j ? 1 : 0) << '\n';
  return out.str();
}

std::string format_budget_csv(const std::vector<BudgetPoint>& budget) {
  std::ostringstream out;
  out << "corpus,method,requested,used,clamped,seeds,mean_auroc,std_auroc\n";
  for (const auto& b : budget) {
    out << b.corpus << ',' << b.method << ',' << budget_label(b.requested) << ',' << b.used << ',' << (b.clamped ? 1 : 0)
        << ',' << b.per_seed.size() << ',' << num(b.mean) << ',' << num(b.stddev) << '\n';
  }
  return out.str();
}

std::string format_ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "corpus,variant,auroc,error\n";
  for (const auto& r : rows) {
    out << r.corpus << ',' << r.label << ',' << (r.error.empty() ? num(r.auroc) : "") << ',' << csv_text(r.error) << '\n';
  }
  return out.str();
}

std::string format_stacker_csv(const std::vector<StackerResult>& stacker) {
  std::ostringstream out;
  out << "corpus,row,auroc,detail\n";
  for (const auto& s : stacker) {
    std::string comps;
    for (const auto& c : s.components) comps += (comps.empty() ? "" : "+") + c;
    out << s.corpus << ",ensemble_pooled," << num(s.pooled_auroc) << ',' << comps << '\n';
    out << s.corpus << ",ensemble_mean_fold," << num(s.mean_fold_auroc) << ',' << comps << '\n';
    for (std::size_t f = 0; f < s.folds.size(); ++f) {
      out << s.corpus << ",fold_" << f << ',' << num(s.folds[f].auroc) << ",C=" << num(s.folds[f].meta_C, "%g") << '\n';
    }
    for (std::size_t c = 0; c < s.components.size(); ++c) {
      out << s.corpus << ",component_" << s.components[c] << ',' << num(s.component_auroc[c]) << ",\n";
    }
    for (const auto& [name, why] : s.unavailable) out << s.corpus << ",unavailable_" << name << ",," << csv_text(why) << '\n';
  }
  return out.str();
}

std::string format_heatmap_csv(const GridResult& grid) {
  std::ostringstream out;
  out << "corpus,method,auroc,verdict\n";
  for (const auto& c : grid.cells) {
    out << c.corpus << ',' << c.method << ',' << num(c.verification.auroc) << ',' << to_string(c.verification.verdict)
        << '\n';
  }
  return out.str();
}

std::string format_roc_csv(const GridResult& grid) {
  std::ostringstream out;
  out << "corpus,method,fpr,tpr\n";
  for (const auto& c : grid.cells) {
    if (c.test_scores.empty()) continue;
    for (const auto& p : roc_curve(c.test_scores, c.test_labels)) {
      out << c.corpus << ',' << c.method << ',' << num(p.fpr) << ',' << num(p.tpr) << '\n';
    }
  }
  return out.str();
}

std::vector<std::filesystem::path> emit_report(const RunResults& r, ReportFormat format,
                                               const std::filesystem::path& out_dir) {
  if (r.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to report");
  std::vector<std::filesystem::path> files;
  switch (format) {
    case ReportFormat::Csv:
      if (r.grid) files.push_back(write_text(out_dir / "cells.csv", format_cells_csv(*r.grid)));
      if (r.transfer) files.push_back(write_text(out_dir / "transfer.csv", format_transfer_csv(*r.transfer)));
      if (!r.budget.empty()) files.push_back(write_text(out_dir / "budget.csv", format_budget_csv(r.budget)));
      if (!r.layer_ablation.empty()) {
        files.push_back(write_text(out_dir / "layer_ablation.csv", format_ablation_csv(r.layer_ablation)));
      }
      if (!r.perturb_ablation.empty()) {
        files.push_back(write_text(out_dir / "perturb_ablation.csv", format_ablation_csv(r.perturb_ablation)));
      }
      if (!r.stacker.empty()) files.push_back(write_text(out_dir / "stacker.csv", format_stacker_csv(r.stacker)));
      break;
    case ReportFormat::Markdown: {
      if (r.grid) {
        const auto rep = verification_from_grid(*r.grid);
        files.push_back(write_text(out_dir / "verification.md", format_verification_markdown(rep)));
        files.push_back(write_text(out_dir / "verification.csv", format_verification_csv(rep)));
      }
      std::ostringstream md;
      if (r.transfer) {
        md << "## Transfer (" << r.transfer->method << ")\n\n";
        std::vector<std::vector<std::string>> t{{"train \\ test"}};
        for (const auto& c : r.transfer->corpora) t[0].push_back(c);
        for (std::size_t i = 0; i < r.transfer->corpora.size(); ++i) {
          t.push_back({r.transfer->corpora[i]});
          for (double v : r.transfer->values[i]) t.back().push_back(num(v, "%.3f"));
        }
        md << markdown_table(t) << '\n';
      }
      if (!r.budget.empty()) {
        md << "## Annotation budget\n\n";
        std::vector<std::vector<std::string>> t{{"corpus", "method", "N", "mean", "std"}};
        for (const auto& b : r.budget) {
          t.push_back({b.corpus, b.method, budget_label(b.requested) + (b.clamped ? "*" : ""), num(b.mean, "%.3f"),
                       num(b.stddev, "%.3f")});
        }
        md << markdown_table(t) << '\n';
      }
      for (const auto* rows : {&r.layer_ablation, &r.perturb_ablation}) {
        if (rows->empty()) continue;
        md << (rows == &r.layer_ablation ? "## Layer ablation\n\n" : "## Perturbation ablation\n\n");
        std::vector<std::vector<std::string>> t{{"corpus", "variant", "AUROC"}};
        for (const auto& a : *rows) t.push_back({a.corpus, a.label, a.error.empty() ? num(a.auroc, "%.3f") : "error"});
        md << markdown_table(t) << '\n';
      }
      for (const auto& s : r.stacker) {
        md << "## Stacker (" << s.corpus << ")\n\n";
        std::vector<std::vector<std::string>> t{{"row", "AUROC"}};
        t.push_back({"ensemble (pooled)", num(s.pooled_auroc, "%.3f")});
        t.push_back({"ensemble (mean over folds)", num(s.mean_fold_auroc, "%.3f")});
        for (std::size_t c = 0; c < s.components.size(); ++c) t.push_back({s.components[c], num(s.component_auroc[c], "%.3f")});
        for (const auto& [name, why] : s.unavailable) t.push_back({name + " (unavailable)", "-"});
        md << markdown_table(t) << '\n';
      }
      if (!md.str().empty()) files.push_back(write_text(out_dir / "summary.md", md.str()));
      break;
    }
    case ReportFormat::PlotData: {
      const auto dir = out_dir / "plotdata";
      if (r.grid) {
        files.push_back(write_text(dir / "heatmap.csv", format_heatmap_csv(*r.grid)));
        files.push_back(write_text(dir / "roc.csv", format_roc_csv(*r.grid)));
      }
      if (r.transfer) files.push_back(write_text(dir / "transfer.csv", format_transfer_csv(*r.transfer)));
      if (!r.budget.empty()) {
        std::ostringstream out;
        out << "corpus,method,n,seed_index,auroc\n";
        for (const auto& b : r.budget)
          for (std::size_t s = 0; s < b.per_seed.size(); ++s)
            out << b.corpus << ',' << b.method << ',' << b.used << ',' << s << ',' << num(b.per_seed[s]) << '\n';
        files.push_back(write_text(dir / "learning_curve.csv", out.str()));
      }
      if (!r.layer_ablation.empty()) {
        files.push_back(write_text(dir / "layer_ablation.csv", format_ablation_csv(r.layer_ablation)));
      }
      if (!r.perturb_ablation.empty()) {
        files.push_back(write_text(dir / "perturb_ablation.csv", format_ablation_csv(r.perturb_ablation)));
      }
      break;
    }
  }
  return files;
}

}  // namespace driftkit
