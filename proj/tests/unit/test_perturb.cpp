#include "driftkit/perturb.hpp"

#include "support.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <regex>

using namespace driftkit;
using namespace testing_support;

TEST(Perturb, NumericalChangesExactlyOneDigit) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::string src = "There are 3 cats";
    const auto out = perturb(Perturbation::NumericalCorruption, "q", src, seed);
    ASSERT_FALSE(out.inapplicable);
    ASSERT_EQ(out.text.size(), src.size());
    int diffs = 0;
    for (std::size_t i = 0; i < src.size(); ++i)
      if (src[i] != out.text[i]) {
        ++diffs;
        EXPECT_TRUE(std::isdigit(static_cast<unsigned char>(out.text[i])));
      }
    EXPECT_EQ(diffs, 1);
  }
}

TEST(Perturb, NumericalMultiDigitRunsKeepLength) {
  const std::string src = "Founded in 1912 with 40 staff";
  const std::regex digits("[0-9]+");
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto out = perturb(Perturbation::NumericalCorruption, "q", src, seed);
    int diffs = 0;
    for (std::size_t i = 0; i < src.size(); ++i) diffs += src[i] != out.text[i];
    EXPECT_EQ(diffs, 1);
    for (std::sregex_iterator it(out.text.begin(), out.text.end(), digits), end; it != end; ++it)
      EXPECT_NE(it->str()[0], '0') << out.text;
  }
}

TEST(Perturb, NumericalInapplicableWithoutDigits) {
  const auto out = perturb(Perturbation::NumericalCorruption, "q", "no numbers here", 1);
  EXPECT_TRUE(out.inapplicable);
  EXPECT_EQ(out.text, "no numbers here");
}

TEST(Perturb, EntitySwap) {
  const auto out = perturb(Perturbation::EntitySwap, "q", "Paris is in France", 42);
  EXPECT_FALSE(out.inapplicable);
  EXPECT_EQ(out.text, "France is in Paris");
  EXPECT_TRUE(perturb(Perturbation::EntitySwap, "q", "only lowercase words", 42).inapplicable);
  EXPECT_TRUE(perturb(Perturbation::EntitySwap, "q", "Paris and Paris", 42).inapplicable);
}

TEST(Perturb, EntitySwapPreservesTokenMultiset) {
  const std::string src = "Marie Curie won Nobel prizes in Physics and Chemistry";
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto out = perturb(Perturbation::EntitySwap, "q", src, seed).text;
    EXPECT_NE(out, src);
    auto a = src, b = out;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
  }
}

TEST(Perturb, NegationFlip) {
  EXPECT_EQ(perturb(Perturbation::NegationFlip, "q", "The sky is not green", 1).text, "The sky is green");
  EXPECT_EQ(perturb(Perturbation::NegationFlip, "q", "It can't fly", 1).text, "It can fly");
  EXPECT_EQ(perturb(Perturbation::NegationFlip, "q", "The sky is blue", 1).text, "The sky is not blue");
  const auto none = perturb(Perturbation::NegationFlip, "q", "Birds fly south", 1);
  EXPECT_TRUE(none.inapplicable);
}

TEST(Perturb, BoundaryViolationTruncatesAndAppends) {
  const std::string src = "one two three four five six seven eight";
  const auto out = perturb(Perturbation::BoundaryViolation, "q", src, 3).text;
  EXPECT_EQ(out.rfind("one two three four five six", 0), 0u);
  EXPECT_EQ(out.find("seven eight"), std::string::npos);
  EXPECT_GT(out.size(), std::string("one two three four five six").size());
}

TEST(Perturb, DeterministicAndSeeded) {
  const std::string resp = "Albert Einstein was born in Ulm in 1879 and did not fail Mathematics";
  const auto a = perturbation_texts("p", resp, 7);
  const auto b = perturbation_texts("p", resp, 7);
  ASSERT_EQ(a.size(), 4u);
  for (auto p : kAllPerturbations) EXPECT_EQ(a.at(p).text, b.at(p).text);
  bool any_diff = false;
  for (std::uint64_t s = 8; s < 20 && !any_diff; ++s) any_diff = perturbation_texts("p", resp, s).at(Perturbation::NumericalCorruption).text != a.at(Perturbation::NumericalCorruption).text;
  EXPECT_TRUE(any_diff);
}

TEST(Perturb, EmptyResponseUnchanged) {
  for (auto p : kAllPerturbations) {
    const auto out = perturb(p, "q", "", 1);
    EXPECT_TRUE(out.inapplicable);
    EXPECT_EQ(out.text, "");
  }
}

TEST(Perturb, SidecarFormat) {
  TempDir dir("perturb_sidecar");
  std::vector<Example> ex = {example("a", 0), example("b", 1)};
  ex[0].response = "Paris is in France with 2 rivers";
  const auto c = make_corpus("s", CorpusFormat::TeacherForced, ex);
  write_perturbation_sidecar(c, dir / "p.jsonl", 5);
  std::ifstream in(dir / "p.jsonl");
  std::vector<nlohmann::json> rows;
  for (std::string line; std::getline(in, line);) rows.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(rows.size(), 8u);
  EXPECT_EQ(rows[0]["example_id"], "a");
  EXPECT_EQ(rows[0]["strategy"], "entity_swap");
  EXPECT_EQ(rows[1]["strategy"], "numerical_corruption");
  EXPECT_EQ(rows[4]["example_id"], "b");
  EXPECT_TRUE(rows[0].contains("inapplicable"));
  EXPECT_EQ(rows[0]["text"], perturb(Perturbation::EntitySwap, ex[0].prompt, ex[0].response, 5).text);
}
