// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>

#include "catnet/error.hpp"
#include "catnet/rng.hpp"
#include "catnet/tape.hpp"
#include "doctest.h"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace catnet;

namespace {

Parameter random_param(const std::string& name, Shape shape, Rng& rng, double scale = 0.5) {
  Parameter p{name, Tensor(shape)};
  for (auto& v : p.value.storage()) v = rng.uniform(-scale, scale);
  return p;
}

}  // namespace

TEST_CASE("stable_softmax examples") {
  auto a = stable_softmax(std::vector<double>{0.0, 0.0}, {true, true});
  CHECK(a[0] == doctest::Approx(0.5));
  CHECK(a[1] == doctest::Approx(0.5));

  auto b = stable_softmax(std::vector<double>{1000.0, 1000.0}, {true, true});
  CHECK(b[0] == doctest::Approx(0.5));
  CHECK(b[1] == doctest::Approx(0.5));

  auto c = stable_softmax(std::vector<double>{std::log(1.0), std::log(3.0)}, {true, true});
  CHECK(c[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(c[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("stable_softmax masks entries and rejects empty support") {
  auto p = stable_softmax(std::vector<double>{5.0, 1.0, 1.0}, {false, true, true});
  CHECK(p[0] == 0.0);
  CHECK(p[1] == doctest::Approx(0.5));
  CHECK_THROWS_WITH_AS(stable_softmax(std::vector<double>{1.0, 2.0}, {false, false}), "empty attention support",
                       NumericError);
}

TEST_CASE("stable_softmax sums to one for large logits") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(12);
    std::vector<double> z(n);
    std::vector<bool> mask(n);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = rng.uniform(-1e3, 1e3);
      mask[i] = rng.bernoulli(0.7);
      any = any || mask[i];
    }
    if (!any) mask[0] = true;
    auto p = stable_softmax(z, mask);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::isfinite(p[i]));
      if (mask[i]) s += p[i];
      else CHECK(p[i] == 0.0);
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("elementwise examples") {
  Tape tape;
  Var zero = tape.constant(Tensor::scalar(0.0));
  CHECK(tape.value(tape.tanh(zero))[0] == 0.0);
  CHECK(tape.value(tape.sigmoid(zero))[0] == 0.5);

  Var eye = tape.constant(Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  Var x = tape.constant(Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
  CHECK(tape.value(tape.matmul(eye, x)) == tape.value(x));

  Var cat = tape.concat_cols({x, x});
  CHECK(tape.value(cat).shape() == Shape{3, 4});
  CHECK(tape.value(tape.sum(x, 0)) == Tensor::matrix(1, 2, {9, 12}));
  CHECK(tape.value(tape.sum(x, 1)) == Tensor::matrix(3, 1, {3, 7, 11}));
}

TEST_CASE("backward of sum gives ones") {
  Parameter x{"x", Tensor::matrix(2, 3, {1, -2, 3, 0.5, 4, -1})};
  Tape tape;
  tape.backward(tape.sum_all(tape.param(x)));
  for (double g : x.grad.storage()) CHECK(g == 1.0);
}

TEST_CASE("sigmoid at zero has slope one quarter") {
  Parameter w{"w", Tensor::scalar(0.7)};
  Tape tape;
  Var z = tape.mul(tape.constant(Tensor::scalar(0.0)), tape.param(w));
  tape.backward(tape.sigmoid(tape.affine(z, 1.0, 0.0)));
  CHECK(w.grad[0] == 0.0);

  Parameter v{"v", Tensor::scalar(0.0)};
  Tape t2;
  t2.backward(t2.sigmoid(t2.scale(t2.param(v), 3.0)));
  CHECK(v.grad[0] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("random graph gradients match finite differences") {
  Rng rng(2024);
  // 20 parameters across five tensors.
  auto a = random_param("a", {2, 3}, rng);
  auto b = random_param("b", {3, 2}, rng);
  auto c = random_param("c", {1, 2}, rng);
  auto d = random_param("d", {2, 2}, rng);
  auto e = random_param("e", {1, 2}, rng);
  std::vector<Parameter*> params{&a, &b, &c, &d, &e};
  auto loss = [&](Tape& t) {
    Var h = t.tanh(t.add(t.matmul(t.param(a), t.param(b)), t.param(c)));
    Var g = t.sigmoid(t.matmul_transposed(h, t.param(d)));
    Var s = t.softmax_rows(t.mul(g, t.square(h)), {true, true, true, false});
    Var cat = t.concat_rows({s, t.param(e)});
    Var l = t.log(t.clamp(t.affine(cat, 0.5, 0.6), 1e-7, 10.0));
    return t.mean_all(t.sub(l, t.scale(t.gather_rows(cat, {2, 0, 2}), 0.3)));
  };
  const auto r = testing::grad_check(params, loss);
  CHECK(r.checked == 20);
  INFO(r.worst);
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("slice, gather and place route gradients") {
  Rng rng(5);
  auto a = random_param("a", {3, 4}, rng);
  auto loss = [&](Tape& t) {
    Var x = t.param(a);
    Var placed = t.place_rows(t.slice_cols(x, 1, 2), {4, 0, 2}, 6);
    Var sq = t.square(t.affine(placed, 1.0, 0.25));
    return t.sum_all(t.mul(sq, t.constant(Tensor::row({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}))));
  };
  const auto r = testing::grad_check({&a}, loss);
  INFO(r.worst);
  CHECK(r.max_rel_error <= 1e-4);
  CHECK(a.grad.at(0, 0) == 0.0);
  CHECK(a.grad.at(2, 3) == 0.0);
}

TEST_CASE("place_rows zero-fills unassigned slots") {
  Tape t;
  Var x = t.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  const auto& out = t.value(t.place_rows(x, {2, 0}, 3));
  CHECK(out == Tensor::matrix(1, 6, {3, 4, 0, 0, 1, 2}));
}

TEST_CASE("parameter used twice accumulates both paths") {
  Parameter w{"w", Tensor::scalar(1.5)};
  Tape t;
  Var x = t.param(w);
  t.backward(t.mul(x, x));
  CHECK(w.grad[0] == doctest::Approx(3.0));
}

TEST_CASE("non-finite results are rejected") {
  Tape t;
  Var x = t.constant(Tensor::scalar(-1.0));
  CHECK_THROWS_AS(t.log(x), NumericError);
  Var big = t.constant(Tensor::scalar(std::numeric_limits<double>::max()));
  CHECK_THROWS_AS(t.add(big, big), NumericError);
}

TEST_CASE("shape mismatches throw") {
  Tape t;
  Var a = t.constant(Tensor({2, 3}));
  Var b = t.constant(Tensor({3, 3}));
  CHECK_THROWS_AS(t.add(a, b), ShapeError);
  CHECK_THROWS_AS(t.matmul(a, a), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
  CHECK_THROWS_AS(t.backward(a), ShapeError);
}

TEST_CASE("identical op sequences are bitwise identical") {
  auto run = [] {
    Rng rng(9);
    auto a = random_param("a", {4, 5}, rng, 2.0);
    Tape t;
    Var x = t.param(a);
    Var y = t.softmax_rows(t.matmul_transposed(t.tanh(x), x));
    t.backward(t.sum_all(t.square(y)));
    return std::make_pair(t.value(y), a.grad);
  };
  const auto r1 = run();
  const auto r2 = run();
  CHECK(r1.first == r2.first);
  CHECK(r1.second == r2.second);
}

TEST_CASE("softmax_rows matches the oracle") {
  Rng rng(3);
  Tensor z({3, 4});
  for (auto& v : z.storage()) v = rng.uniform(-3, 3);
  Tape t;
  const auto& p = t.value(t.softmax_rows(t.constant(z)));
  for (std::size_t r = 0; r < 3; ++r) {
    auto ref = oracle::softmax({z.at(r, 0), z.at(r, 1), z.at(r, 2), z.at(r, 3)});
    for (std::size_t c = 0; c < 4; ++c) CHECK(p.at(r, c) == doctest::Approx(ref[c]).epsilon(1e-14));
  }
}
