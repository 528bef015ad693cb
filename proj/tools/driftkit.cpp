#include "driftkit/activation_cache.hpp"
#include "driftkit/config.hpp"
#include "driftkit/corpus.hpp"
#include "driftkit/harness.hpp"
#include "driftkit/perturb.hpp"
#include "driftkit/report.hpp"
#include "driftkit/rng.hpp"
#include "driftkit/stacker.hpp"
#include "driftkit/synthetic.hpp"
#include "driftkit/txtemb.hpp"
#include "driftkit/verification.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace driftkit;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  fs::path out_dir = "out";
  std::size_t threads = 0;
};

ExperimentConfig configure(const fs::path& path, const Globals& g) {
  ExperimentConfig cfg = load_config(path);
  if (g.seed) override_seed(cfg, *g.seed);
  if (g.threads) cfg.threads = g.threads;
  return cfg;
}

void announce(const std::vector<fs::path>& files) {
  for (const auto& f : files) std::cout << "wrote " << f.string() << '\n';
}

void emit_all(const RunResults& r, const fs::path& out, bool plotdata) {
  announce(emit_report(r, ReportFormat::Csv, out));
  announce(emit_report(r, ReportFormat::Markdown, out));
  if (plotdata) announce(emit_report(r, ReportFormat::PlotData, out));
}

void print_audit(const LeakAudit& audit) {
  const auto v = audit.violations();
  std::cout << "leak audit: " << audit.entries().size() << " fits, " << v << " train/test intersections\n";
  if (v) throw Error(ErrorCode::AlignmentError, "leak audit found train/test overlap");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty() || s == "-") return std::nullopt;
  return std::stod(s);
}

// Accepts cells.csv, verification.csv, or a hand-written table with at least
// corpus,method,auroc. Rows already marked NotApplicable pass through.
VerificationReport verify_csv(const fs::path& path, const VerdictRules& rules, bool strict) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::SchemaError, path.string() + " is empty");
  std::map<std::string, std::size_t> col;
  const auto header = split_csv_line(line);
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"corpus", "method", "auroc"})
    if (!col.count(need)) throw Error(ErrorCode::SchemaError, std::string("missing column '") + need + "'");

  std::vector<CellInputs> cells;
  std::vector<VerificationCell> passthrough;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    auto get = [&](const char* name) -> std::string {
      auto it = col.find(name);
      return it == col.end() || it->second >= f.size() ? std::string() : f[it->second];
    };
    try {
      CellInputs c;
      c.corpus = get("corpus");
      c.method = get("method");
      if (get("verdict") == "NotApplicable" && get("auroc").empty()) {
        VerificationCell v;
        v.corpus = c.corpus;
        v.method = c.method;
        v.auroc = std::numeric_limits<double>::quiet_NaN();
        v.verdict = Verdict::NotApplicable;
        passthrough.push_back(v);
        continue;
      }
      if (!get("error").empty()) c.error = get("error");
      if (auto a = parse_opt(get("auroc"))) c.auroc = *a;
      else if (!c.error) c.error = "no AUROC";
      c.ci_low = parse_opt(get("ci_low"));
      c.ci_high = parse_opt(get("ci_high"));
      c.null_mean = parse_opt(get("null_mean"));
      c.txtemb_auroc = parse_opt(get("txtemb_auroc"));
      c.txtemb_gap = parse_opt(get("txtemb_gap"));
      if (!get("control_defined").empty()) c.control_defined = get("control_defined") != "0";
      else c.control_defined = c.txtemb_auroc || c.txtemb_gap;
      cells.push_back(std::move(c));
    } catch (const std::invalid_argument&) {
      throw Error(ErrorCode::SchemaError, path.string() + ":" + std::to_string(lineno) + ": not a number");
    }
  }
  VerificationReport rep = verify_table(cells, rules, strict);
  for (auto& p : passthrough) {
    ++rep.totals[p.verdict];
    rep.rows.push_back(std::move(p));
  }
  std::stable_sort(rep.rows.begin(), rep.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.corpus, a.method) < std::tie(b.corpus, b.method);
  });
  return rep;
}

int run_synth(const fs::path& out, std::uint64_t seed, std::size_t n, std::size_t dim) {
  ExperimentConfig cfg;
  fs::create_directories(out / "data");
  for (auto [name, fmt] : {std::pair{"synth_tf", CorpusFormat::TeacherForced}, std::pair{"synth_lg", CorpusFormat::LiveGeneration}}) {
    SyntheticSpec spec;
    spec.name = name;
    spec.format = fmt;
    spec.n = n;
    spec.hidden_dim = dim;
    spec.seed = seed;
    spec.direction = random_unit_vector(dim, seed);
    const auto data = make_synthetic(spec);
    const auto files = write_synthetic(data, out / "data");
    std::printf("%s: %zu examples, Bayes AUROC %.3f\n", name, data.corpus.size(), data.bayes_auroc);
    cfg.corpora.push_back({name, fs::absolute(files.corpus), fs::absolute(files.cache), fmt});
  }
  cfg.methods = known_methods();
  cfg.seed = seed;
  cfg.split.seed = seed;
  cfg.mlp.seed = seed;
  cfg.mlp.epochs = 50;
  std::ofstream(out / "config.json") << config_to_json(cfg) << '\n';
  std::cout << "wrote " << (out / "config.json").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"driftkit: hallucination-detector evaluation over cached hidden states"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Override every seed in the config");
  app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (overrides the config)");

  fs::path config_path;
  auto add_config = [&](CLI::App* sub) { sub->add_option("-c,--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile); };

  auto* ingest = app.add_subcommand("ingest", "Validate a corpus, write its perturbation sidecar and manifest");
  fs::path corpus_path, cache_path;
  std::string format = "tf", corpus_name;
  ingest->add_option("corpus", corpus_path, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  ingest->add_option("--format", format, "tf or lg")->capture_default_str();
  ingest->add_option("--name", corpus_name, "Corpus name (default: file stem)");
  ingest->add_option("--cache", cache_path, "Activation cache to check against the corpus")->check(CLI::ExistingFile);

  auto* grid = app.add_subcommand("grid", "Every method on every corpus, with verification");
  add_config(grid);

  auto* transfer = app.add_subcommand("transfer", "Cross-corpus transfer matrix");
  add_config(transfer);
  std::string method;
  transfer->add_option("--method", method, "Method (default: focus_method from the config)");

  auto* stacker = app.add_subcommand("stacker", "Nested cross-validated stacking ensemble");
  add_config(stacker);

  auto* budget = app.add_subcommand("budget", "AUROC against training-set size");
  add_config(budget);
  budget->add_option("--method", method, "Method (default: focus_method from the config)");

  auto* ablate_layers = app.add_subcommand("ablate-layers", "Single-tap probes against the combined DRIFT probe");
  add_config(ablate_layers);
  auto* ablate_perturb = app.add_subcommand("ablate-perturb", "Perturbation-delta probe per strategy");
  add_config(ablate_perturb);

  auto* verify = app.add_subcommand("verify", "Apply the verdict rules to a table of cells");
  fs::path cells_path;
  bool lenient = false;
  verify->add_option("cells", cells_path, "CSV with corpus,method,auroc,ci_low,ci_high,null_mean,txtemb_auroc|txtemb_gap")
      ->required()
      ->check(CLI::ExistingFile);
  verify->add_flag("--lenient", lenient, "Turn incomplete cells into Error rows instead of failing");

  auto* report = app.add_subcommand("report", "Run the configured experiments and emit one report format");
  add_config(report);
  std::string report_format = "markdown";
  std::vector<std::string> sections = {"grid"};
  report->add_option("--format", report_format, "csv, markdown or plotdata")->capture_default_str();
  report->add_option("--include", sections, "grid, transfer, budget, stacker, ablate-layers, ablate-perturb")
      ->delimiter(',')
      ->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Write a synthetic TF/LG corpus pair and a config for them");
  std::size_t synth_n = 600, synth_dim = 16;
  synth->add_option("--n", synth_n, "Examples per corpus")->capture_default_str();
  synth->add_option("--dim", synth_dim, "Hidden width")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return run_synth(g.out_dir, g.seed.value_or(kDefaultSeed), synth_n, synth_dim);

    if (*ingest) {
      const auto fmt = corpus_format_from_string(format);
      Corpus c = load_corpus(corpus_path, fmt, corpus_name.empty() ? corpus_path.stem().string() : corpus_name);
      std::printf("%s: %zu examples (%zu correct, %zu hallucinated), format %s\n", c.name.c_str(), c.size(),
                  c.label_counts.negatives, c.label_counts.positives, to_string(fmt).c_str());
      const auto control = txtemb_control(c);
      if (control.defined) std::printf("text control AUROC %.3f%s\n", control.auroc, control.flipped ? " (flipped)" : "");
      else std::printf("text control undefined (missing reference_text)\n");
      fs::create_directories(g.out_dir);
      const auto sidecar = g.out_dir / (c.name + ".perturb.jsonl");
      write_perturbation_sidecar(c, sidecar, g.seed.value_or(kDefaultSeed));
      std::cout << "wrote " << sidecar.string() << '\n';
      std::vector<ManifestEntry> manifest;
      for (std::size_t i = 0; i < c.size(); ++i) manifest.push_back({c.examples[i].example_id, c.name, i + 1});
      if (!cache_path.empty()) {
        auto contents = read_cache(cache_path);
        const auto data = align(c, std::move(contents.records), contents.header, kDefaultTapFractions);
        std::printf("cache: %zu records, %u taps, d=%u, %u samples\n", data.records.size(),
                    data.header.n_layers_tapped, data.header.hidden_dim, data.header.n_samples);
      }
      const auto mpath = g.out_dir / (c.name + ".manifest.tsv");
      write_manifest(manifest, mpath);
      std::cout << "wrote " << mpath.string() << '\n';
      return 0;
    }

    if (*verify) {
      const auto rep = verify_csv(cells_path, VerdictRules{}, !lenient);
      fs::create_directories(g.out_dir);
      write_verification(rep, g.out_dir);
      std::cout << format_verification_markdown(rep);
      return 0;
    }

    const ExperimentConfig cfg = configure(config_path, g);
    const std::string focus = method.empty() ? cfg.focus_method : method;
    LeakAudit audit;
    RunResults r;

    auto want = [&](CLI::App* sub, const char* section) {
      return *sub || (*report && std::find(sections.begin(), sections.end(), section) != sections.end());
    };
    for (const auto& s : sections) {
      static const std::vector<std::string> kSections = {"grid", "transfer", "budget", "stacker", "ablate-layers", "ablate-perturb"};
      if (*report && std::find(kSections.begin(), kSections.end(), s) == kSections.end())
        throw Error(ErrorCode::InvalidArgument, "unknown report section '" + s + "'");
    }

    const auto corpora = load_all(cfg);
    if (want(grid, "grid")) {
      r.grid = run_grid(corpora, cfg, &audit);
      for (const auto& c : r.grid->cells) {
        std::printf("%-16s %-13s %s %s\n", c.corpus.c_str(), c.method.c_str(),
                    std::isfinite(c.verification.auroc) ? std::to_string(c.verification.auroc).substr(0, 5).c_str() : "  -  ",
                    to_string(c.verification.verdict).c_str());
      }
    }
    if (want(transfer, "transfer")) r.transfer = run_transfer(corpora, cfg, focus, &audit);
    if (want(budget, "budget")) r.budget = run_budget(corpora, cfg, focus, &audit);
    if (want(ablate_layers, "ablate-layers")) r.layer_ablation = run_layer_ablation(corpora, cfg, &audit);
    if (want(ablate_perturb, "ablate-perturb")) r.perturb_ablation = run_perturb_ablation(corpora, cfg, &audit);
    if (want(stacker, "stacker")) {
      for (const auto& c : corpora) {
        try {
          r.stacker.push_back(run_stacker(c, cfg, &audit));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::ComponentUnavailable) throw;
          std::cerr << c.name << ": " << e.what() << '\n';
        }
      }
    }
    print_audit(audit);
    if (*report) announce(emit_report(r, report_format_from_string(report_format), g.out_dir));
    else emit_all(r, g.out_dir, r.grid.has_value());
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
