#include <doctest.h>

#include "edit_oracle.hpp"
#include "lta/error.hpp"
#include "lta/metrics.hpp"

using namespace lta;
using lta::testing::Word;

namespace {

ActionSequence seq(std::initializer_list<std::pair<int, int>> pairs) {
  ActionSequence s;
  for (auto [v, n] : pairs) s.push_back({v, n});
  return s;
}

std::size_t dl(const std::string& a, const std::string& b) {
  return damerau_levenshtein(std::vector<char>(a.begin(), a.end()),
                             std::vector<char>(b.begin(), b.end()));
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("edit distance on hand-checked pairs") {
  CHECK(dl("", "") == 0);
  CHECK(dl("abc", "") == 3);
  CHECK(dl("", "ab") == 2);
  CHECK(dl("ab", "ba") == 1);
  CHECK(dl("kitten", "sitting") == 3);
  CHECK(dl("abcd", "acbd") == 1);
  CHECK(dl("ca", "abc") == 3);
}

TEST_CASE("the two search oracles disagree exactly where the variant matters") {
  const Word ca{2, 0}, abc{0, 1, 2};
  CHECK(lta::testing::script_search_distance(ca, abc) == 3);
  CHECK(lta::testing::rewrite_search_distance(ca, abc, 3) == 2);
  CHECK(damerau_levenshtein(ca, abc) == 3);
}

TEST_CASE("distance matches script search on short words") {
  const auto words = lta::testing::all_words(2, 4);
  for (const auto& a : words)
    for (const auto& b : words)
      REQUIRE(damerau_levenshtein(a, b) == lta::testing::script_search_distance(a, b));
}

TEST_CASE("ed_at_z picks the best candidate per mode") {
  const ActionSequence truth = seq({{0, 0}, {1, 1}, {2, 2}, {3, 3}});
  const std::vector<ActionSequence> cands = {
      seq({{0, 9}, {1, 9}, {2, 9}, {3, 9}}),  // verbs right, nouns wrong
      seq({{9, 0}, {9, 1}, {9, 2}, {9, 3}}),  // nouns right, verbs wrong
  };
  const EDResult r = ed_at_z(cands, truth);
  CHECK(r.verb.value == doctest::Approx(0.0));
  CHECK(r.verb.best_k == 0);
  CHECK(r.noun.value == doctest::Approx(0.0));
  CHECK(r.noun.best_k == 1);
  CHECK(r.action.value == doctest::Approx(1.0));
}

TEST_CASE("ed_at_z normalizes by Z and handles a transposition") {
  const ActionSequence truth = seq({{0, 0}, {1, 1}, {2, 2}, {3, 3}});
  const std::vector<ActionSequence> cands = {seq({{1, 1}, {0, 0}, {2, 2}, {3, 3}})};
  CHECK(ed_at_z(cands, truth, LabelMode::kAction).value == doctest::Approx(0.25));
}

TEST_CASE("ed_at_z rejects shape errors") {
  const ActionSequence truth = seq({{0, 0}, {1, 1}});
  const std::vector<ActionSequence> none;
  CHECK_THROWS_AS(ed_at_z(none, truth, LabelMode::kVerb), Error);
  const std::vector<ActionSequence> wrong = {seq({{0, 0}})};
  CHECK_THROWS_AS(ed_at_z(wrong, truth, LabelMode::kVerb), Error);
}

TEST_CASE("per-horizon curve uses prefixes") {
  const ActionSequence truth = seq({{0, 0}, {1, 1}, {2, 2}});
  const std::vector<ActionSequence> cands = {seq({{0, 0}, {5, 1}, {2, 2}})};
  const auto curve = per_horizon_ed(cands, truth, LabelMode::kVerb);
  REQUIRE(curve.size() == 3);
  CHECK(curve[0] == doctest::Approx(0.0));
  CHECK(curve[1] == doctest::Approx(0.5));
  CHECK(curve[2] == doctest::Approx(1.0 / 3.0));
  CHECK(curve.back() == doctest::Approx(ed_at_z(cands, truth, LabelMode::kVerb).value));
}

TEST_CASE("out-of-context rates against intention bags") {
  ContextBags bags(2, 4, 4);
  bags.add(0, {0, 0});
  bags.add(0, {1, 1});
  bags.add(1, {2, 2});
  const std::vector<ActionSequence> preds = {seq({{0, 0}, {1, 2}}), seq({{2, 2}, {0, 0}})};
  const std::vector<int> intentions = {0, 1};
  const OocRates r = out_of_context_rates(preds, intentions, bags);
  CHECK(r.tokens == 4);
  CHECK(r.verb == doctest::Approx(0.25));
  CHECK(r.noun == doctest::Approx(0.5));
  const std::vector<int> bad = {0, 7};
  CHECK_THROWS_AS(out_of_context_rates(preds, bad, bags), Error);
}

TEST_CASE("accuracy split by intention correctness") {
  ClassifiedExample right;
  right.verb_ranked = {{0, 1}, {2, 1}};
  right.noun_ranked = {{3, 0}, {1, 0}};
  right.truth = seq({{0, 3}, {1, 0}});
  right.predicted_intention = right.true_intention = 1;
  ClassifiedExample wrong = right;
  wrong.predicted_intention = 0;
  wrong.truth = seq({{1, 0}, {1, 1}});
  const std::vector<ClassifiedExample> all = {right, wrong};
  const AccuracyTable t = accuracy_by_intention_correctness(all);
  CHECK(t.intention_top1 == doctest::Approx(0.5));
  REQUIRE(t.intention_correct);
  REQUIRE(t.intention_error);
  CHECK(t.intention_correct->verb_top1 == doctest::Approx(0.5));
  CHECK(t.intention_correct->verb_top5 == doctest::Approx(1.0));
  CHECK(t.intention_correct->noun_top1 == doctest::Approx(0.5));
  CHECK(t.intention_error->verb_top1 == doctest::Approx(0.0));
  CHECK(t.intention_error->noun_top1 == doctest::Approx(0.5));
  CHECK(t.intention_error->noun_top5 == doctest::Approx(1.0));
}

TEST_CASE("evaluate_candidates aggregates and refuses empty input") {
  ContextBags bags(1, 3, 3);
  bags.add(0, {0, 0});
  const std::vector<std::vector<ActionSequence>> cands = {{seq({{0, 0}, {0, 0}})},
                                                          {seq({{1, 1}, {0, 0}})}};
  const std::vector<ActionSequence> truths = {seq({{0, 0}, {0, 0}}), seq({{0, 0}, {0, 0}})};
  const std::vector<int> intentions = {0, 0};
  const MetricsReport r = evaluate_candidates(cands, truths, intentions, bags);
  CHECK(r.n_examples == 2);
  CHECK(r.ed_verb == doctest::Approx(0.25));
  CHECK(r.curve_verb.size() == 2);
  CHECK(r.curve_verb[0] == doctest::Approx(0.5));
  CHECK(r.ooc.noun == doctest::Approx(0.25));
  const auto j = r.to_json();
  CHECK(j.contains("ed20"));
  CHECK(j["accuracy"].empty());

  const std::vector<std::vector<ActionSequence>> no_cands;
  const std::vector<ActionSequence> no_truths;
  const std::vector<int> no_int;
  try {
    evaluate_candidates(no_cands, no_truths, no_int, bags);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyEvaluation);
  }
}

}  // TEST_SUITE
