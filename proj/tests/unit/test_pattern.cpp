#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "futon/parser.hpp"
#include "futon/pattern.hpp"
#include "support.hpp"

using namespace futon;

TEST_CASE("maturity table") {
  CHECK(classify_maturity(FieldPresence{true, true}) == MaturityState{Maturity::active, 0.8});
  CHECK(classify_maturity(FieldPresence{true, false}) ==
        MaturityState{Maturity::greenfield, 0.4});
  CHECK(classify_maturity(FieldPresence{false, true}) == MaturityState{Maturity::settled, 0.9});
  CHECK(classify_maturity(FieldPresence{false, false}) == MaturityState{Maturity::stub, 0.2});
}

TEST_CASE("priors order settled > active > greenfield > stub") {
  CHECK(precision_prior(Maturity::settled) > precision_prior(Maturity::active));
  CHECK(precision_prior(Maturity::active) > precision_prior(Maturity::greenfield));
  CHECK(precision_prior(Maturity::greenfield) > precision_prior(Maturity::stub));
  for (Maturity m : kAllMaturities) {
    CHECK(precision_prior(m) > 0.0);
    CHECK(precision_prior(m) < 1.0);
  }
}

TEST_CASE("maturity names round-trip") {
  for (Maturity m : kAllMaturities) {
    CHECK(maturity_from_string(to_string(m)) == m);
    CHECK(maturity_from_string(std::string(":") + to_string(m)) == m);
  }
  CHECK_FALSE(maturity_from_string("mature").has_value());
}

TEST_CASE("classify from documents") {
  PatternDocument doc;
  CHECK(classify_maturity(doc).state == Maturity::stub);
  doc.next_steps = {"  "};
  CHECK(classify_maturity(doc).state == Maturity::stub);
  doc.next_steps = {"log it"};
  CHECK(classify_maturity(doc).state == Maturity::greenfield);
  doc.evidence = {"ticket#4"};
  CHECK(classify_maturity(doc).state == Maturity::active);
  doc.next_steps.clear();
  CHECK(classify_maturity(doc).state == Maturity::settled);
}

TEST_CASE("classification depends only on field presence") {
  std::mt19937_64 gen(7);
  auto random_text = [&](int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s.push_back(static_cast<char>('a' + gen() % 26));
    return s;
  };
  for (int i = 0; i < 500; ++i) {
    PatternDocument doc;
    doc.id = "p/x";
    if (gen() % 2) doc.next_steps.push_back("step");
    if (gen() % 2) doc.evidence.push_back("ev");
    const MaturityState before = classify_maturity(doc);
    doc.summary = random_text(1 + static_cast<int>(gen() % 40));
    doc.context = random_text(1 + static_cast<int>(gen() % 40));
    doc.then_clause = random_text(1 + static_cast<int>(gen() % 40));
    for (auto& s : doc.next_steps) s = random_text(1 + static_cast<int>(gen() % 20));
    for (auto& s : doc.evidence) s = random_text(1 + static_cast<int>(gen() % 20));
    CHECK(classify_maturity(doc) == before);
  }
}

TEST_CASE("fixture maturities") {
  const PatternLibrary sample_library = load_library(testing::fixture_dir() / "sample_library");
  REQUIRE(sample_library.patterns.size() == 3);
  for (const auto& [id, doc] : sample_library.patterns) {
    CHECK(classify_maturity(doc).state == Maturity::greenfield);
  }
  const PatternLibrary extra = load_library(testing::fixture_dir() / "extra");
  CHECK(classify_maturity(*extra.find("fixture/active-both")).state == Maturity::active);
  CHECK(classify_maturity(*extra.find("fixture/settled-evidence")).state == Maturity::settled);
  CHECK(classify_maturity(*extra.find("fixture/stub-bare")).state == Maturity::stub);
}

TEST_CASE("pattern ids") {
  CHECK(is_valid_pattern_id("fulab/blast-radius"));
  CHECK(is_valid_pattern_id("p4ng/agent-command-pattern"));
  CHECK_FALSE(is_valid_pattern_id(""));
  CHECK_FALSE(is_valid_pattern_id("has space"));
}
