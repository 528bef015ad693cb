#include "driftkit/config.hpp"

#include "support.hpp"

#include <fstream>

using namespace driftkit;
using namespace testing_support;

namespace {

const char* kMinimal = R"({
  "corpora": [{"name": "a", "corpus": "a.jsonl", "cache": "a.cache", "format": "tf"}],
  "methods": ["drift", "txtemb"]
})";

}  // namespace

TEST(Config, DefaultsFromMinimal) {
  const auto c = parse_config(kMinimal, "/base", false);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.corpora[0].corpus_path, std::filesystem::path("/base/a.jsonl"));
  EXPECT_EQ(c.tap_fractions, kDefaultTapFractions);
  EXPECT_EQ(c.stats.n_bootstrap, 1000u);
  EXPECT_EQ(c.stats.n_permutations, 30u);
  EXPECT_EQ(c.budget.sizes, (std::vector<std::size_t>{25, 50, 100, 250, 500, kBudgetFull}));
  EXPECT_EQ(c.budget.seeds, 10u);
  EXPECT_EQ(c.stacker.outer_folds, 5u);
  EXPECT_EQ(c.stacker.inner_folds, 5u);
  EXPECT_DOUBLE_EQ(c.split.train_fraction, 0.8);
}

TEST(Config, FullSchema) {
  const auto c = parse_config(R"({
    "seed": 7, "threads": 3,
    "corpora": [{"name": "a", "corpus": "/x/a.jsonl", "cache": "/x/a.cache", "format": "lg"}],
    "methods": ["drift"],
    "taps": [0.5, 0.9],
    "focus_method": "act",
    "split": {"train_fraction": 0.7, "folds": 4},
    "stats": {"n_bootstrap": 200, "n_permutations": 10},
    "budget": {"sizes": [10, 20, "full"], "seeds": 3},
    "stacker": {"components": ["drift", "act"], "outer_folds": 3, "inner_folds": 2},
    "verdict": {"auroc_trigger": 0.8, "ci_threshold": 0.75, "gap_threshold": 0.1, "tf_dependent": ["approach_b"]},
    "mlp": {"learning_rate": 0.01, "epochs": 5, "batch_size": 8, "cosine_decay": false}
  })",
                              {}, false);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.split.seed, 7u);
  EXPECT_EQ(c.mlp.seed, 7u);
  EXPECT_EQ(c.threads, 3u);
  EXPECT_EQ(c.corpora[0].format, CorpusFormat::LiveGeneration);
  EXPECT_EQ(c.tap_fractions, (std::vector<double>{0.5, 0.9}));
  EXPECT_EQ(c.focus_method, "act");
  EXPECT_EQ(c.split.n_folds, 4u);
  EXPECT_EQ(c.budget.sizes, (std::vector<std::size_t>{10, 20, kBudgetFull}));
  EXPECT_EQ(c.stacker.components, (std::vector<std::string>{"drift", "act"}));
  EXPECT_DOUBLE_EQ(c.rules.gap_threshold, 0.1);
  EXPECT_EQ(c.mlp.epochs, 5u);
  EXPECT_FALSE(c.mlp.cosine_decay);
}

TEST(Config, Invariants) {
  auto code = [](const std::string& text) { return error_code_of([&] { parse_config(text, {}, false); }); };
  EXPECT_EQ(code(R"({"corpora": [{"name":"a","corpus":"a","cache":"b","format":"tf"}], "methods": []})"),
            ErrorCode::ConfigError);
  EXPECT_EQ(code(R"({"corpora": [{"name":"a","corpus":"a","cache":"b","format":"tf"}], "methods": ["nope"]})"),
            ErrorCode::ConfigError);
  EXPECT_EQ(code(R"({"corpora": [{"name":"a","corpus":"a","cache":"b","format":"tf"}], "methods": ["drift"],
                    "budget": {"sizes": [50, 25]}})"),
            ErrorCode::ConfigError);
  EXPECT_EQ(code(R"({"corpora": [{"name":"a","corpus":"a","cache":"b","format":"tf"},
                                 {"name":"a","corpus":"c","cache":"d","format":"tf"}], "methods": ["drift"]})"),
            ErrorCode::ConfigError);
  EXPECT_EQ(code("{not json"), ErrorCode::ConfigError);
  EXPECT_EQ(code(R"({"methods": ["drift"]})"), ErrorCode::ConfigError);
}

TEST(Config, PathsMustExist) {
  TempDir dir("config");
  EXPECT_EQ(error_code_of([&] { parse_config(kMinimal, dir.path(), true); }), ErrorCode::ConfigError);
  std::ofstream(dir / "a.jsonl") << "";
  std::ofstream(dir / "a.cache") << "";
  EXPECT_NO_THROW(parse_config(kMinimal, dir.path(), true));
  std::ofstream(dir / "cfg.json") << kMinimal;
  EXPECT_EQ(load_config(dir / "cfg.json").corpora[0].cache_path, dir / "a.cache");
}

TEST(Config, JsonRoundTripAndSeedOverride) {
  auto c = parse_config(kMinimal, "/base", false);
  c.budget.sizes = {5, kBudgetFull};
  const auto back = parse_config(config_to_json(c), {}, false);
  EXPECT_EQ(back.methods, c.methods);
  EXPECT_EQ(back.budget.sizes, c.budget.sizes);
  EXPECT_EQ(back.corpora[0].corpus_path, c.corpora[0].corpus_path);
  override_seed(c, 9);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.split.seed, 9u);
  EXPECT_EQ(c.mlp.seed, 9u);
}

TEST(Config, KnownMethods) {
  EXPECT_EQ(known_methods().size(), 12u);
  EXPECT_TRUE(is_known_method("approach_f"));
  EXPECT_FALSE(is_known_method("approach_e"));
}
