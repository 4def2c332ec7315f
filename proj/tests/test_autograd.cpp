#include <doctest.h>

#include <cmath>

#include "lta/autograd.hpp"
#include "test_util.hpp"

using namespace lta;
using ag::Matrix;
using ag::Tape;
using ag::Var;
using lta::testing::gradient_check;
using lta::testing::random_matrix;

namespace {

// Reduces any output to a scalar through fixed random weights so that every
// output entry contributes a distinct gradient.
Var probe(Tape& tape, const Var& out, std::uint64_t seed) {
  Rng rng(seed);
  const Var w = tape.constant(random_matrix(out.rows(), out.cols(), rng));
  return ag::sum_all(ag::mul(out, w));
}

struct Fixture {
  ag::ParameterSet params;
  ag::Parameter* a;
  ag::Parameter* b;
  Fixture(Eigen::Index ar, Eigen::Index ac, Eigen::Index br, Eigen::Index bc) {
    Rng rng(11);
    a = &params.add("a", ar, ac);
    a->value = random_matrix(ar, ac, rng);
    b = &params.add("b", br, bc);
    b->value = random_matrix(br, bc, rng);
  }
};

constexpr double kTol = 1e-6;

}  // namespace

TEST_SUITE("autograd") {

TEST_CASE("binary ops") {
  Fixture f(3, 4, 4, 2);
  CHECK(gradient_check(f.params, [&](Tape& t) {
          return probe(t, ag::matmul(t.param(*f.a), t.param(*f.b)), 1);
        }) < kTol);
  Fixture g(3, 4, 5, 4);
  CHECK(gradient_check(g.params, [&](Tape& t) {
          return probe(t, ag::matmul_nt(t.param(*g.a), t.param(*g.b)), 2);
        }) < kTol);
  Fixture h(3, 4, 3, 4);
  CHECK(gradient_check(h.params, [&](Tape& t) {
          const Var a = t.param(*h.a), b = t.param(*h.b);
          return probe(t, ag::mul(a + b, a - b), 3);
        }) < kTol);
  Fixture r(3, 4, 1, 4);
  CHECK(gradient_check(r.params, [&](Tape& t) {
          return probe(t, ag::add_row(t.param(*r.a), t.param(*r.b)), 4);
        }) < kTol);
}

TEST_CASE("unary ops") {
  Fixture f(3, 5, 1, 1);
  const auto check = [&](const std::function<Var(const Var&)>& op, std::uint64_t seed) {
    return gradient_check(f.params, [&](Tape& t) { return probe(t, op(t.param(*f.a)), seed); });
  };
  CHECK(check([](const Var& x) { return ag::gelu(x); }, 5) < kTol);
  CHECK(check([](const Var& x) { return ag::exp(x); }, 6) < kTol);
  CHECK(check([](const Var& x) { return ag::transpose(x); }, 7) < kTol);
  CHECK(check([](const Var& x) { return ag::scale(x, -2.5); }, 8) < kTol);
  CHECK(check([](const Var& x) { return ag::softmax_rows(x); }, 9) < kTol);
  CHECK(check([](const Var& x) { return ag::mean_rows(x); }, 10) < kTol);
  CHECK(check([](const Var& x) { return ag::slice_rows(x, 1, 2); }, 11) < kTol);
  CHECK(check([](const Var& x) { return ag::slice_cols(x, 2, 3); }, 12) < kTol);
  CHECK(check([](const Var& x) { return ag::clamp(x, -0.5, 0.5); }, 13) < kTol);
  CHECK(check([](const Var& x) {
          const int rows[] = {2, 0, 2};
          return ag::gather_rows(x, rows);
        }, 14) < kTol);
}

TEST_CASE("layer norm") {
  ag::ParameterSet params;
  Rng rng(3);
  auto& x = params.add("x", 4, 6);
  x.value = random_matrix(4, 6, rng);
  auto& g = params.add("g", 1, 6);
  g.value = random_matrix(1, 6, rng);
  auto& b = params.add("b", 1, 6);
  b.value = random_matrix(1, 6, rng);
  CHECK(gradient_check(params, [&](Tape& t) {
          return probe(t, ag::layer_norm(t.param(x), t.param(g), t.param(b)), 15);
        }) < kTol);
}

TEST_CASE("concatenation") {
  Fixture f(2, 3, 2, 3);
  CHECK(gradient_check(f.params, [&](Tape& t) {
          const Var parts[] = {t.param(*f.a), t.param(*f.b), t.param(*f.a)};
          return probe(t, ag::concat_rows(parts), 16);
        }) < kTol);
  CHECK(gradient_check(f.params, [&](Tape& t) {
          const Var parts[] = {t.param(*f.b), t.param(*f.a)};
          return probe(t, ag::concat_cols(parts), 17);
        }) < kTol);
}

TEST_CASE("losses") {
  Fixture f(4, 5, 4, 5);
  const int targets[] = {0, 3, 4, 3};
  const double weights[] = {1.0, 0.5, 2.0, 1.5, 0.7};
  CHECK(gradient_check(f.params, [&](Tape& t) {
          return ag::weighted_cross_entropy(t.param(*f.a), targets, weights);
        }) < kTol);
  CHECK(gradient_check(f.params, [&](Tape& t) {
          return ag::weighted_cross_entropy(t.param(*f.a), targets, weights, 2.0);
        }) < kTol);
  CHECK(gradient_check(f.params, [&](Tape& t) {
          return ag::mse(t.param(*f.a), t.param(*f.b));
        }) < kTol);
  Fixture k(1, 6, 1, 6);
  CHECK(gradient_check(k.params, [&](Tape& t) {
          return ag::kl_standard_normal(t.param(*k.a), t.param(*k.b));
        }) < kTol);
}

TEST_CASE("cross entropy value") {
  Tape t;
  Matrix logits(2, 3);
  logits << 1.0, 2.0, 3.0, 0.0, 0.0, 0.0;
  const int targets[] = {2, 1};
  const double w[] = {1.0, 1.0, 1.0};
  const double expected =
      0.5 * (-(3.0 - std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0))) + std::log(3.0));
  CHECK(ag::weighted_cross_entropy(t.constant(logits), targets, w).scalar() ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("parameters are shared within one tape") {
  ag::ParameterSet params;
  auto& p = params.add("p", 1, 1);
  p.value(0, 0) = 3.0;
  Tape t;
  const Var y = ag::mul(t.param(p), t.param(p));
  ag::Gradients g = ag::zero_gradients(params);
  t.backward(ag::sum_all(y), g);
  CHECK(g[0](0, 0) == doctest::Approx(6.0));
}

TEST_CASE("gelu uses the exact erf form") {
  CHECK(ag::gelu_value(1.0) == doctest::Approx(0.5 * (1.0 + std::erf(1.0 / std::sqrt(2.0)))));
  CHECK(ag::gelu_value(0.0) == 0.0);
}

}  // TEST_SUITE
