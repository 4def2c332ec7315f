#include <doctest.h>

#include <cmath>
#include <vector>

#include "lta/error.hpp"
#include "lta/h3m.hpp"
#include "test_util.hpp"

using namespace lta;
using ag::Matrix;
using lta::testing::gradient_check;
using lta::testing::random_matrix;

namespace {

using Grid = std::vector<std::vector<double>>;

Grid to_grid(const Matrix& m) {
  Grid g(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) g[r][c] = m(r, c);
  return g;
}

Grid layer_norm_rows(const Grid& x, const Matrix& gamma, const Matrix& beta) {
  Grid out = x;
  for (std::size_t r = 0; r < x.size(); ++r) {
    double mean = 0.0;
    for (double v : x[r]) mean += v;
    mean /= x[r].size();
    double var = 0.0;
    for (double v : x[r]) var += (v - mean) * (v - mean);
    var /= x[r].size();
    for (std::size_t c = 0; c < x[r].size(); ++c)
      out[r][c] = (x[r][c] - mean) / std::sqrt(var + 1e-5) * gamma(0, c) + beta(0, c);
  }
  return out;
}

Grid dense(const Grid& x, const nn::Linear& l) {
  const Matrix& w = l.weight->value;
  Grid out(x.size(), std::vector<double>(w.cols()));
  for (std::size_t r = 0; r < x.size(); ++r)
    for (Eigen::Index o = 0; o < w.cols(); ++o) {
      double s = l.bias->value(0, o);
      for (Eigen::Index i = 0; i < w.rows(); ++i) s += x[r][i] * w(i, o);
      out[r][o] = s;
    }
  return out;
}

Grid mlp(const Grid& x, const nn::FeedForward& f) {
  Grid h = dense(x, f.fc1);
  for (auto& row : h)
    for (double& v : row) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
  return dense(h, f.fc2);
}

Grid transpose(const Grid& x) {
  Grid t(x[0].size(), std::vector<double>(x.size()));
  for (std::size_t r = 0; r < x.size(); ++r)
    for (std::size_t c = 0; c < x[r].size(); ++c) t[c][r] = x[r][c];
  return t;
}

Grid reference_mixer(const Grid& x, const nn::MixerLayer& m) {
  const Grid tok = transpose(
      mlp(transpose(layer_norm_rows(x, m.token_norm.gamma->value, m.token_norm.beta->value)),
          m.token_mlp));
  Grid y = x;
  for (std::size_t r = 0; r < y.size(); ++r)
    for (std::size_t c = 0; c < y[r].size(); ++c) y[r][c] += tok[r][c];
  const Grid ch =
      mlp(layer_norm_rows(y, m.channel_norm.gamma->value, m.channel_norm.beta->value),
          m.channel_mlp);
  for (std::size_t r = 0; r < y.size(); ++r)
    for (std::size_t c = 0; c < y[r].size(); ++c) y[r][c] += ch[r][c];
  return y;
}

void randomize(ag::ParameterSet& params, Rng& rng, double scale = 0.5) {
  for (std::size_t i = 0; i < params.size(); ++i)
    params[i].value = random_matrix(params[i].value.rows(), params[i].value.cols(), rng, scale);
}

H3MConfig tiny_config() {
  H3MConfig c;
  c.T = 4;
  c.D = 6;
  c.N = 3;
  c.depth = 1;
  c.intention_depth = 1;
  return c;
}

}  // namespace

TEST_SUITE("h3m") {

TEST_CASE("mixer layer matches a scalar reference") {
  ag::ParameterSet params;
  Rng rng(5);
  const auto layer = nn::MixerLayer::create(params, "m", 4, 6, 5, 3, rng);
  randomize(params, rng);
  const Matrix x = random_matrix(4, 6, rng);
  ag::Tape tape(false);
  const Matrix got = layer(tape, tape.constant(x)).value();
  const Grid want = reference_mixer(to_grid(x), layer);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 6; ++c) CHECK(got(r, c) == doctest::Approx(want[r][c]).epsilon(1e-12));
}

TEST_CASE("mixer with zeroed residual branches is the identity") {
  ag::ParameterSet params;
  Rng rng(6);
  const auto layer = nn::MixerLayer::create(params, "m", 4, 6, 8, 3, rng);
  for (auto* l : {&layer.token_mlp.fc2, &layer.channel_mlp.fc2}) {
    l->weight->value.setZero();
    l->bias->value.setZero();
  }
  const Matrix x = random_matrix(4, 6, rng);
  ag::Tape tape(false);
  CHECK((layer(tape, tape.constant(x)).value() - x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mixer rejects the wrong shape") {
  ag::ParameterSet params;
  Rng rng(6);
  const auto layer = nn::MixerLayer::create(params, "m", 4, 6, 8, 3, rng);
  ag::Tape tape(false);
  CHECK_THROWS_AS(layer(tape, tape.constant(Matrix::Zero(6, 4))), Error);
}

TEST_CASE("class-balanced weights") {
  const long counts[] = {1, 100};
  const auto raw = class_balanced_raw(counts, 0.99);
  CHECK(raw[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(raw[1] == doctest::Approx(0.01 / (1.0 - std::pow(0.99, 100))).epsilon(1e-12));
  CHECK(raw[1] == doctest::Approx(0.0157738).epsilon(1e-6));

  const long with_absent[] = {10, 0, 10};
  const auto w = class_balanced_weights(with_absent, 0.9);
  CHECK(w[1] == 0.0);
  CHECK(w[0] == doctest::Approx(1.0));
  CHECK(w[2] == doctest::Approx(1.0));

  const long skewed[] = {1, 1000, 5};
  const auto zero_beta = class_balanced_weights(skewed, 0.0);
  for (double v : zero_beta) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(class_balanced_weights(skewed, 1.0), Error);
}

TEST_CASE("top-k breaks ties toward lower ids") {
  Matrix m(1, 5);
  m << 0.5, 2.0, 2.0, -1.0, 0.5;
  CHECK(argmax_row(m, 0) == 1);
  CHECK(top_k_row(m, 0, 5) == std::vector<int>{1, 2, 0, 4, 3});
  CHECK(top_k_row(m, 0, 2) == std::vector<int>{1, 2});
}

TEST_CASE("forward shapes and inference") {
  const H3MConfig cfg = tiny_config();
  const VocabSizes sizes{3, 7, 2};
  const H3M model(cfg, sizes, 9);
  Rng rng(1);
  std::vector<Matrix> clips;
  for (int i = 0; i < cfg.N; ++i) clips.push_back(random_matrix(cfg.T, cfg.D, rng));
  const std::vector<int> valid(cfg.N, cfg.T);
  ag::Tape tape(false);
  const H3MLogits out = model.forward(tape, clips, valid);
  CHECK(out.verbs.rows() == cfg.N);
  CHECK(out.verbs.cols() == 3);
  CHECK(out.nouns.cols() == 7);
  CHECK(out.intention.rows() == 1);
  CHECK(out.intention.cols() == 2);
  const H3MPrediction p = model.infer(clips, valid);
  CHECK(p.actions.size() == static_cast<std::size_t>(cfg.N));
  CHECK(p.verb_top5[0].size() == 3);
  CHECK(p.noun_top5[0].size() == 5);
  CHECK(p.intention == p.intention_top5.front());

  const std::vector<Matrix> too_few(clips.begin(), clips.begin() + 2);
  const std::vector<int> two(2, cfg.T);
  ag::Tape t2(false);
  CHECK_THROWS_AS(model.forward(t2, too_few, two), Error);
}

TEST_CASE("masked pooling ignores padded rows") {
  H3MConfig cfg = tiny_config();
  cfg.masked_pool = true;
  const H3M model(cfg, {3, 4, 2}, 2);
  Rng rng(4);
  Matrix a = random_matrix(cfg.T, cfg.D, rng);
  ag::Tape t1(false), t2(false);
  const Matrix full = model.action_mixer_forward(t1, a, cfg.T).value();
  const Matrix masked = model.action_mixer_forward(t2, a, 2).value();
  CHECK((full - masked).norm() > 1e-6);
}

TEST_CASE("intention branch mask covers only intention parameters") {
  const H3M model(tiny_config(), {3, 4, 2}, 2);
  const auto mask = model.intention_branch_mask();
  REQUIRE(mask.size() == model.params().size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const std::string& name = model.params()[i].name;
    const bool intention = name.rfind("intention_", 0) == 0;
    CHECK(mask[i] == intention);
  }
}

TEST_CASE("two-layer mixer gradient check") {
  ag::ParameterSet params;
  Rng rng(12);
  std::vector<nn::MixerLayer> layers;
  for (int l = 0; l < 2; ++l)
    layers.push_back(nn::MixerLayer::create(params, "m" + std::to_string(l), 4, 6, 5, 3, rng));
  auto& input = params.add("input", 4, 6);
  input.value = random_matrix(4, 6, rng);
  const Matrix probe = random_matrix(4, 6, rng);
  const double err = gradient_check(params, [&](ag::Tape& t) {
    ag::Var x = t.param(input);
    for (const auto& l : layers) x = l(t, x);
    return ag::sum_all(ag::mul(x, t.constant(probe)));
  });
  CHECK(err < 1e-4);
}

TEST_CASE("config round trip and unknown keys") {
  H3MConfig c;
  c.depth = 3;
  c.schedule = Schedule::kJoint;
  const H3MConfig back = H3MConfig::from_json(c.to_json());
  CHECK(back.depth == 3);
  CHECK(back.schedule == Schedule::kJoint);
  auto j = c.to_json();
  j["dropout"] = 0.1;
  CHECK_THROWS_AS(H3MConfig::from_json(j), Error);
}

}  // TEST_SUITE
