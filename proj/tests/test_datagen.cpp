#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "lta/datagen.hpp"
#include "lta/error.hpp"
#include "test_util.hpp"

using namespace lta;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

json annotation(const std::string& video, int index, const std::string& verb,
                const std::string& noun, const std::string& intention) {
  return {{"video_id", video}, {"clip_index", index}, {"verb", verb},
          {"noun", noun},      {"intention", intention},
          {"feature_file", video + "_" + std::to_string(index) + ".bin"}};
}

void write(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(); }

GrammarConfig small_grammar() {
  GrammarConfig g;
  g.num_intentions = 3;
  g.num_verbs = 5;
  g.num_nouns = 9;
  g.noun_bag_size = 3;
  g.T = 4;
  g.feature_dim = 8;
  g.train_windows = 40;
  g.eval_windows = 5;
  g.seed = 17;
  return g;
}

}  // namespace

TEST_SUITE("datagen") {

TEST_CASE("window counts per video length") {
  const auto count = [](int len) {
    return make_windows(lta::testing::toy_dataset({len}), 6, 20, 1).size();
  };
  CHECK(count(25) == 0);
  CHECK(count(26) == 1);
  CHECK(count(27) == 2);
  const auto ds = lta::testing::toy_dataset({30, 26});
  CHECK(make_windows(ds, 6, 20, 1).size() == 6);
  CHECK(make_windows(ds, 6, 20, 26).size() == 2);
}

TEST_CASE("window contents") {
  const auto ds = lta::testing::toy_dataset({10});
  const auto w = make_windows(ds, 3, 2, 1);
  REQUIRE(w.size() == 6);
  const auto& ex = w[2];
  CHECK(ex.start == 2);
  CHECK(ex.observed_clips == std::vector<std::size_t>{2, 3, 4});
  CHECK(ex.observed_actions[0] == ds.records[2].label);
  CHECK(ex.future_actions[0] == ds.records[5].label);
  CHECK(ex.future_actions.size() == 2);
  CHECK(ex.id() == "vid0#5");
}

TEST_CASE("dataset round trip through disk") {
  const auto dir = lta::testing::temp_dir("roundtrip");
  auto ds = lta::testing::toy_dataset({4, 3});
  ds.features[1].valid_rows = 1;
  ds.features[1].matrix.row(1).setZero();
  write_dataset(ds, dir);
  const Dataset back = load_dataset(dir, &ds.vocab);
  REQUIRE(back.records.size() == ds.records.size());
  CHECK(back.T == ds.T);
  CHECK(back.features[1].valid_rows == 1);
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    CHECK(back.records[i].label == ds.records[i].label);
    CHECK(back.features[i].matrix == ds.features[i].matrix);
  }
}

TEST_CASE("loader errors") {
  const auto dir = lta::testing::temp_dir("loader");
  const auto path = dir / "annotations.json";

  write(path, json::array());
  CHECK(code_of([&] { load_annotations(path, nullptr); }) == ErrorCode::kEmptyDataset);

  write(path, json::array({annotation("a", 0, "cut", "bowl", "cook"),
                           annotation("a", 2, "cut", "bowl", "cook")}));
  CHECK(code_of([&] { load_annotations(path, nullptr); }) == ErrorCode::kNonContiguous);

  write(path, json::array({annotation("a", 0, "cut", "bowl", "cook"),
                           annotation("a", 1, "cut", "bowl", "wash")}));
  CHECK(code_of([&] { load_annotations(path, nullptr); }) == ErrorCode::kMalformed);

  const Vocabulary vocab({"cut"}, {"bowl"}, {"cook"});
  write(path, json::array({annotation("a", 0, "stir", "bowl", "cook")}));
  CHECK(code_of([&] { load_annotations(path, &vocab); }) == ErrorCode::kUnknownLabel);

  write(path, json::array({json{{"video_id", "a"}}}));
  CHECK(code_of([&] { load_annotations(path, nullptr); }) == ErrorCode::kMalformed);

  std::ofstream(path) << "[{";
  CHECK(code_of([&] { load_annotations(path, nullptr); }) == ErrorCode::kMalformed);

  CHECK(code_of([&] { load_annotations(dir / "absent.json", nullptr); }) ==
        ErrorCode::kMissingFile);
}

TEST_CASE("records are sorted and the vocabulary is built") {
  const auto dir = lta::testing::temp_dir("sorted");
  const auto path = dir / "annotations.json";
  write(path, json::array({annotation("b", 0, "take", "pan", "wash"),
                           annotation("a", 1, "cut", "knife", "cook"),
                           annotation("a", 0, "take", "bowl", "cook")}));
  Vocabulary built;
  const auto recs = load_annotations(path, nullptr, &built);
  CHECK(recs[0].video_id == "a");
  CHECK(recs[0].clip_index == 0);
  CHECK(recs[2].video_id == "b");
  CHECK(built.verbs() == std::vector<std::string>{"cut", "take"});
  CHECK(built.nouns() == std::vector<std::string>{"bowl", "knife", "pan"});
  CHECK(recs[1].label == ActionLabel{0, 1});
}

TEST_CASE("feature files are checked against T x D") {
  const auto dir = lta::testing::temp_dir("features");
  ClipFeature f;
  f.matrix = FeatureMatrix::Ones(3, 4);
  f.valid_rows = 2;
  save_feature(dir / "x.bin", f);
  const ClipFeature back = load_feature(dir / "x.bin", 3, 4, 2);
  CHECK(back.matrix.row(0).sum() == doctest::Approx(4.0));
  CHECK(back.matrix.row(2).sum() == 0.0);
  CHECK(code_of([&] { load_feature(dir / "x.bin", 4, 4, 2); }) == ErrorCode::kFeatureShape);
}

TEST_CASE("synthetic features have the configured noise") {
  GrammarConfig g = small_grammar();
  g.feature_dim = 64;
  const SyntheticData data = synth_generate(g);
  Rng rng(3);
  double sum_sq = 0.0;
  long n = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const ActionLabel a{rep % 5, rep % 9};
    const ClipFeature f = synth_features(a, data.prototypes, 14, 0.1, rng);
    const Eigen::RowVectorXd proto = data.prototypes.prototype(a);
    for (int r = 0; r < f.valid_rows; ++r)
      for (int c = 0; c < f.cols(); ++c) {
        const double e = f.matrix(r, c) - proto(c);
        sum_sq += e * e;
        ++n;
      }
    for (int r = f.valid_rows; r < f.rows(); ++r) CHECK(f.matrix.row(r).cwiseAbs().sum() == 0.0);
    CHECK(f.valid_rows >= 7);
    CHECK(f.valid_rows <= 14);
  }
  const double sd = std::sqrt(sum_sq / n);
  CHECK(sd > 0.09);
  CHECK(sd < 0.11);
}

TEST_CASE("synthetic grammar structure") {
  const GrammarConfig g = small_grammar();
  const SyntheticData data = synth_generate(g);
  CHECK(data.vocab.num_verbs() == 5);
  CHECK(data.vocab.num_nouns() == 9);
  CHECK(data.vocab.num_intentions() == 3);
  std::set<int> covered;
  for (const auto& bag : data.grammar.noun_bags) {
    CHECK(bag.size() == 3);
    covered.insert(bag.begin(), bag.end());
  }
  CHECK(covered.size() == 9);
  CHECK(make_windows(data.train, 6, 20, 1).size() >= 40);
  CHECK(make_windows(data.eval, 6, 20, 26).size() >= 5);
  for (const auto& r : data.train.records) {
    const auto& bag = data.grammar.noun_bags[r.intention_id];
    CHECK(std::find(bag.begin(), bag.end(), r.label.noun) != bag.end());
  }
}

TEST_CASE("synthetic generation is deterministic per seed") {
  const GrammarConfig g = small_grammar();
  const SyntheticData a = synth_generate(g), b = synth_generate(g);
  REQUIRE(a.train.records.size() == b.train.records.size());
  for (std::size_t i = 0; i < a.train.records.size(); ++i) {
    CHECK(a.train.records[i].label == b.train.records[i].label);
    CHECK(a.train.features[i].matrix == b.train.features[i].matrix);
  }
  GrammarConfig other = g;
  other.seed = 18;
  const SyntheticData c = synth_generate(other);
  bool differs = c.train.records.size() != a.train.records.size();
  for (std::size_t i = 0; !differs && i < a.train.records.size(); ++i)
    differs = !(a.train.records[i].label == c.train.records[i].label);
  CHECK(differs);
}

TEST_CASE("explicit grammar is honored and validated") {
  GrammarConfig g = small_grammar();
  g.motifs = {{{0, 1, 0}}, {{2, 3, 2}}, {{4, 4, 4}}};
  g.noun_bags = {{0, 1, 2}, {3, 4, 5}, {6, 7, 8}};
  const SyntheticData data = synth_generate(g);
  CHECK(data.grammar.noun_bags == g.noun_bags);
  for (const auto& r : data.train.records) {
    if (r.intention_id == 2) CHECK(r.label.verb == 4);
  }
  g.noun_bags[0][0] = 99;
  CHECK_THROWS_AS(g.validate(), Error);
  auto j = small_grammar().to_json();
  j["colour"] = "red";
  CHECK_THROWS_AS(GrammarConfig::from_json(j), Error);
}

TEST_CASE("write_synthetic lays out a loadable dataset") {
  const auto dir = lta::testing::temp_dir("synthetic");
  const GrammarConfig g = small_grammar();
  const SyntheticData data = synth_generate(g);
  write_synthetic(data, g, dir);
  CHECK(fs::exists(dir / "vocab.json"));
  CHECK(fs::exists(dir / "grammar.json"));
  const Dataset train = load_dataset(dir / "train");
  CHECK(train.vocab == data.vocab);
  CHECK(train.records.size() == data.train.records.size());
  CHECK(train.features[0].matrix == data.train.features[0].matrix);
}

}  // TEST_SUITE
