#include <doctest.h>

#include <fstream>
#include <iterator>

#include "lta/checkpoint.hpp"
#include "lta/error.hpp"
#include "lta/h3m.hpp"
#include "lta/icvae.hpp"
#include "test_util.hpp"

using namespace lta;
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

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

H3MConfig tiny_h3m() {
  H3MConfig c;
  c.T = 4;
  c.D = 6;
  c.N = 2;
  c.depth = 1;
  c.intention_depth = 1;
  return c;
}

ICVAEConfig tiny_icvae() {
  ICVAEConfig c;
  c.d = 4;
  c.N = 2;
  c.Z = 3;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.heads = 2;
  return c;
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("raw round trip is bit exact") {
  const auto dir = lta::testing::temp_dir("ckpt_raw");
  ag::ParameterSet params;
  Rng rng(1);
  params.add("a", 2, 3).value = lta::testing::random_matrix(2, 3, rng);
  params.add("b.c", 1, 5).value = lta::testing::random_matrix(1, 5, rng);
  save_checkpoint(params, {{"model", "test"}, {"x", 3}}, dir / "p.ckpt");
  const Checkpoint back = load_checkpoint(dir / "p.ckpt");
  CHECK(back.header["x"] == 3);
  REQUIRE(back.params.size() == 2);
  CHECK(back.params[1].name == "b.c");
  CHECK(back.params[0].value == params[0].value);
  CHECK(back.params[1].value == params[1].value);
}

TEST_CASE("corruption is detected") {
  const auto dir = lta::testing::temp_dir("ckpt_corrupt");
  ag::ParameterSet params;
  params.add("a", 2, 2).value.setConstant(1.5);
  save_checkpoint(params, {{"model", "test"}}, dir / "p.ckpt");
  const std::string good = slurp(dir / "p.ckpt");

  std::string flipped = good;
  flipped[flipped.size() / 2] ^= 0x01;
  spit(dir / "flip.ckpt", flipped);
  CHECK(code_of([&] { load_checkpoint(dir / "flip.ckpt"); }) == ErrorCode::kCorruptCheckpoint);

  spit(dir / "short.ckpt", good.substr(0, good.size() - 3));
  CHECK(code_of([&] { load_checkpoint(dir / "short.ckpt"); }) == ErrorCode::kCorruptCheckpoint);

  spit(dir / "long.ckpt", good + "x");
  CHECK(code_of([&] { load_checkpoint(dir / "long.ckpt"); }) == ErrorCode::kCorruptCheckpoint);

  spit(dir / "magic.ckpt", "NOTACKPT" + good.substr(8));
  CHECK(code_of([&] { load_checkpoint(dir / "magic.ckpt"); }) == ErrorCode::kCorruptCheckpoint);

  CHECK(code_of([&] { load_checkpoint(dir / "absent.ckpt"); }) == ErrorCode::kMissingFile);
}

TEST_CASE("models reload with identical outputs") {
  const auto dir = lta::testing::temp_dir("ckpt_models");
  const VocabSizes sizes{3, 5, 2};
  const H3M h3m(tiny_h3m(), sizes, 4);
  h3m.save(dir / "h3m.ckpt", 4);
  const H3M h3m_back = H3M::load(dir / "h3m.ckpt");
  Rng rng(2);
  std::vector<ag::Matrix> clips = {lta::testing::random_matrix(4, 6, rng),
                                   lta::testing::random_matrix(4, 6, rng)};
  const std::vector<int> valid = {4, 4};
  ag::Tape t1(false), t2(false);
  CHECK(h3m.forward(t1, clips, valid).verbs.value() ==
        h3m_back.forward(t2, clips, valid).verbs.value());
  CHECK(h3m_back.config().N == 2);

  const ICVAE icvae(tiny_icvae(), sizes, 5);
  icvae.save(dir / "icvae.ckpt", 5);
  const ICVAE icvae_back = ICVAE::load(dir / "icvae.ckpt");
  const ActionSequence obs = {{0, 1}, {2, 3}};
  CHECK(icvae.generate(obs, 1, 3, 3, 8) == icvae_back.generate(obs, 1, 3, 3, 8));
  const auto header = load_checkpoint(dir / "icvae.ckpt").header;
  CHECK(header["model"] == "icvae");
  CHECK(header["N"] == 2);
  CHECK(header["Z"] == 3);

  CHECK(code_of([&] { H3M::load(dir / "icvae.ckpt"); }) == ErrorCode::kModelMismatch);
  CHECK(code_of([&] { ICVAE::load(dir / "h3m.ckpt"); }) == ErrorCode::kModelMismatch);
}

TEST_CASE("restore requires matching names and shapes") {
  ag::ParameterSet a, b, c;
  a.add("w", 2, 2).value.setConstant(3.0);
  b.add("w", 2, 2);
  restore_parameters(a, b);
  CHECK(b[0].value(1, 1) == 3.0);
  c.add("w", 3, 2);
  CHECK(code_of([&] { restore_parameters(a, c); }) == ErrorCode::kModelMismatch);
}

TEST_CASE("config hash ignores key order") {
  const nlohmann::json a = nlohmann::json::parse(R"({"x": 1, "y": {"p": 2, "q": [1, 2]}})");
  const nlohmann::json b = nlohmann::json::parse(R"({"y": {"q": [1, 2], "p": 2}, "x": 1})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  const nlohmann::json c = nlohmann::json::parse(R"({"x": 2, "y": {"p": 2, "q": [1, 2]}})");
  CHECK(config_hash(a) != config_hash(c));
}

}  // TEST_SUITE
