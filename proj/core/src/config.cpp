#include "driftkit/config.hpp"

#include "driftkit/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace driftkit {

namespace {

using nlohmann::json;

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> kMethods = {
      "drift",      "drift_concat", "act",        "saplma",     "hallushift", "drift_logp",
      "approach_a", "approach_b",   "approach_c", "approach_d", "approach_f", "txtemb",
  };
  return kMethods;
}

bool is_known_method(const std::string& name) {
  const auto& m = known_methods();
  return std::find(m.begin(), m.end(), name) != m.end();
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir, bool check_paths) {
  ExperimentConfig cfg;
  try {
    const json j = json::parse(text);
    cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
    cfg.threads = std::max<std::size_t>(1, get_or<std::size_t>(j, "threads", cfg.threads));

    for (const auto& c : j.at("corpora")) {
      CorpusEntry e;
      e.name = c.at("name").get<std::string>();
      e.corpus_path = resolve(base_dir, c.at("corpus").get<std::string>());
      e.cache_path = resolve(base_dir, c.at("cache").get<std::string>());
      e.format = corpus_format_from_string(c.at("format").get<std::string>());
      cfg.corpora.push_back(std::move(e));
    }
    cfg.methods = j.at("methods").get<std::vector<std::string>>();
    cfg.tap_fractions = get_or(j, "taps", cfg.tap_fractions);
    cfg.focus_method = get_or(j, "focus_method", cfg.focus_method);

    if (auto it = j.find("split"); it != j.end()) {
      cfg.split.train_fraction = get_or(*it, "train_fraction", cfg.split.train_fraction);
      cfg.split.n_folds = get_or(*it, "folds", cfg.split.n_folds);
    }
    if (auto it = j.find("stats"); it != j.end()) {
      cfg.stats.n_bootstrap = get_or(*it, "n_bootstrap", cfg.stats.n_bootstrap);
      cfg.stats.n_permutations = get_or(*it, "n_permutations", cfg.stats.n_permutations);
    }
    if (auto it = j.find("budget"); it != j.end()) {
      if (auto s = it->find("sizes"); s != it->end()) {
        cfg.budget.sizes.clear();
        for (const auto& v : *s) {
          if (v.is_string()) {
            if (v.get<std::string>() != "full") throw Error(ErrorCode::ConfigError, "budget size must be a count or \"full\"");
            cfg.budget.sizes.push_back(kBudgetFull);
          } else {
            cfg.budget.sizes.push_back(v.get<std::size_t>());
          }
        }
      }
      cfg.budget.seeds = get_or(*it, "seeds", cfg.budget.seeds);
    }
    if (auto it = j.find("stacker"); it != j.end()) {
      cfg.stacker.components = get_or(*it, "components", cfg.stacker.components);
      cfg.stacker.outer_folds = get_or(*it, "outer_folds", cfg.stacker.outer_folds);
      cfg.stacker.inner_folds = get_or(*it, "inner_folds", cfg.stacker.inner_folds);
    }
    if (auto it = j.find("verdict"); it != j.end()) {
      cfg.rules.auroc_trigger = get_or(*it, "auroc_trigger", cfg.rules.auroc_trigger);
      cfg.rules.ci_threshold = get_or(*it, "ci_threshold", cfg.rules.ci_threshold);
      cfg.rules.gap_threshold = get_or(*it, "gap_threshold", cfg.rules.gap_threshold);
      cfg.rules.tf_dependent_methods = get_or(*it, "tf_dependent", cfg.rules.tf_dependent_methods);
    }
    if (auto it = j.find("mlp"); it != j.end()) {
      cfg.mlp.learning_rate = get_or(*it, "learning_rate", cfg.mlp.learning_rate);
      cfg.mlp.epochs = get_or(*it, "epochs", cfg.mlp.epochs);
      cfg.mlp.batch_size = get_or(*it, "batch_size", cfg.mlp.batch_size);
      cfg.mlp.cosine_decay = get_or(*it, "cosine_decay", cfg.mlp.cosine_decay);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("malformed config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, e.what());
  }
  override_seed(cfg, cfg.seed);

  if (cfg.corpora.empty()) throw Error(ErrorCode::ConfigError, "config lists no corpora");
  if (cfg.methods.empty()) throw Error(ErrorCode::ConfigError, "method list is empty");
  for (const auto& m : cfg.methods) {
    if (!is_known_method(m)) throw Error(ErrorCode::ConfigError, "unknown method '" + m + "'");
  }
  for (const auto& m : cfg.stacker.components) {
    if (!is_known_method(m)) throw Error(ErrorCode::ConfigError, "unknown stacker component '" + m + "'");
  }
  if (!is_known_method(cfg.focus_method)) throw Error(ErrorCode::ConfigError, "unknown focus method '" + cfg.focus_method + "'");
  if (cfg.budget.sizes.empty() || !std::is_sorted(cfg.budget.sizes.begin(), cfg.budget.sizes.end()) ||
      std::adjacent_find(cfg.budget.sizes.begin(), cfg.budget.sizes.end()) != cfg.budget.sizes.end()) {
    throw Error(ErrorCode::ConfigError, "budget grid must be strictly ascending");
  }
  std::vector<std::string> names;
  for (const auto& c : cfg.corpora) names.push_back(c.name);
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
    throw Error(ErrorCode::ConfigError, "corpus names must be unique");
  }
  if (check_paths) {
    for (const auto& c : cfg.corpora) {
      for (const auto& p : {c.corpus_path, c.cache_path}) {
        if (!std::filesystem::exists(p)) throw Error(ErrorCode::ConfigError, "missing file " + p.string());
      }
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, bool check_paths) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path(), check_paths);
}

std::string config_to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["corpora"] = nlohmann::ordered_json::array();
  for (const auto& c : cfg.corpora) {
    j["corpora"].push_back({{"name", c.name},
                            {"corpus", c.corpus_path.generic_string()},
                            {"cache", c.cache_path.generic_string()},
                            {"format", to_string(c.format)}});
  }
  j["methods"] = cfg.methods;
  j["taps"] = cfg.tap_fractions;
  j["focus_method"] = cfg.focus_method;
  j["split"] = {{"train_fraction", cfg.split.train_fraction}, {"folds", cfg.split.n_folds}};
  j["stats"] = {{"n_bootstrap", cfg.stats.n_bootstrap}, {"n_permutations", cfg.stats.n_permutations}};
  auto sizes = nlohmann::ordered_json::array();
  for (auto s : cfg.budget.sizes) {
    if (s == kBudgetFull) {
      sizes.push_back("full");
    } else {
      sizes.push_back(s);
    }
  }
  j["budget"] = {{"sizes", sizes}, {"seeds", cfg.budget.seeds}};
  j["stacker"] = {{"components", cfg.stacker.components},
                  {"outer_folds", cfg.stacker.outer_folds},
                  {"inner_folds", cfg.stacker.inner_folds}};
  j["verdict"] = {{"auroc_trigger", cfg.rules.auroc_trigger},
                  {"ci_threshold", cfg.rules.ci_threshold},
                  {"gap_threshold", cfg.rules.gap_threshold},
                  {"tf_dependent", cfg.rules.tf_dependent_methods}};
  j["mlp"] = {{"learning_rate", cfg.mlp.learning_rate},
              {"epochs", cfg.mlp.epochs},
              {"batch_size", cfg.mlp.batch_size},
              {"cosine_decay", cfg.mlp.cosine_decay}};
  return j.dump(2) + "\n";
}

void override_seed(ExperimentConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.split.seed = seed;
  config.mlp.seed = seed;
}

}  // namespace driftkit
