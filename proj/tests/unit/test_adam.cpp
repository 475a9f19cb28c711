// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "catnet/adam.hpp"
#include "catnet/error.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace catnet;

TEST_CASE("first step moves each weight by about the learning rate") {
  AdamConfig cfg;
  cfg.lr = 1e-3;
  AdamState st;
  Tensor w = Tensor::row({0.5, -0.5, 2.0});
  adam_step(w, Tensor::row({1.0, -3.0, 1e-3}), st, 1, cfg);
  CHECK(0.5 - w[0] == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(w[1] + 0.5 == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(2.0 - w[2] == doctest::Approx(1e-3).epsilon(1e-4));
}

TEST_CASE("zero gradients leave parameters unchanged") {
  AdamConfig cfg;
  AdamState st;
  Tensor w = Tensor::row({0.25, -7.0});
  for (std::size_t t = 1; t <= 20; ++t) adam_step(w, Tensor::row({0.0, 0.0}), st, t, cfg);
  CHECK(w[0] == 0.25);
  CHECK(w[1] == -7.0);
}

TEST_CASE("three steps on w squared follow the hand trace") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  Parameter w("w", Tensor::scalar(1.0));
  Adam opt({&w}, cfg);
  for (int t = 0; t < 3; ++t) {
    w.grad[0] = 2.0 * w.value[0];
    opt.step();
  }
  const double ref = oracle::adam_trace(1.0, 0.1, 0.9, 0.999, 1e-8, 3, [](double x) { return 2.0 * x; });
  CHECK(w.value[0] == doctest::Approx(ref).epsilon(1e-15));
  CHECK(opt.steps() == 3);
}

TEST_CASE("step index starts at one") {
  AdamState st;
  Tensor w = Tensor::row({1.0});
  CHECK_THROWS(adam_step(w, Tensor::row({1.0}), st, 0, AdamConfig{}));
}
