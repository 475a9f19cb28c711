// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "catnet/error.hpp"
#include "catnet/metrics.hpp"
#include "catnet/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace catnet;

namespace {

// Scores drawn from a small grid so that ties are common.
struct Case {
  std::vector<double> scores, labels;
};

Case random_case(Rng& rng, bool ties) {
  const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform(0.0, 60.0));
  Case c;
  for (std::size_t i = 0; i < n; ++i) {
    c.scores.push_back(ties ? std::floor(rng.uniform(0.0, 5.0)) / 4.0 : rng.uniform(0.0, 1.0));
    c.labels.push_back(rng.bernoulli(0.35) ? 1.0 : 0.0);
  }
  c.labels[0] = 1.0;
  c.labels[1] = 0.0;
  return c;
}

}  // namespace

TEST_CASE("auc worked examples") {
  CHECK(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<double>{0, 0, 1, 1}) == 0.75);
  CHECK(auc(std::vector<double>{0.1, 0.2, 0.3, 0.9}, std::vector<double>{0, 0, 1, 1}) == 1.0);
  CHECK(auc(std::vector<double>{0.4, 0.4, 0.4, 0.4}, std::vector<double>{1, 0, 1, 0}) == 0.5);
  CHECK_THROWS_WITH_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<double>{1, 1}), doctest::Contains("AUC undefined"),
                       NumericError);
  CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<double>{1, 0.5}), DataError);
}

TEST_CASE("average precision worked examples") {
  CHECK(aupr(std::vector<double>{0.9, 0.8, 0.7, 0.6}, std::vector<double>{1, 0, 1, 0}) ==
        doctest::Approx(0.8333333333333334).epsilon(1e-15));
  CHECK(aupr(std::vector<double>{0.9, 0.8, 0.7, 0.6}, std::vector<double>{1, 1, 0, 0}) == 1.0);
  CHECK(aupr(std::vector<double>{0.9, 0.8, 0.7, 0.6, 0.5}, std::vector<double>{0, 0, 0, 0, 1}) ==
        doctest::Approx(0.2).epsilon(1e-15));
  CHECK_THROWS(aupr(std::vector<double>{0.9, 0.8}, std::vector<double>{0, 0}));
}

TEST_CASE("top-k recall worked examples") {
  const std::vector<std::vector<double>> s{{0.9, 0.1, 0.8, 0.7, 0.2}};
  const std::vector<std::vector<double>> y{{0, 1, 0, 1, 0}};
  CHECK(topk_recall(s, y, 2).recall == 0.0);
  CHECK(topk_recall(s, y, 5).recall == 1.0);
  CHECK(topk_recall(s, y, 50).recall == 1.0);
  CHECK(topk_recall(s, y, 4).recall == 0.5);
  // Equal scores resolve by ascending code index.
  CHECK(topk_recall({{0.5, 0.5, 0.5}}, {{0, 0, 1}}, 2).recall == 0.0);
  CHECK(topk_recall({{0.5, 0.5, 0.5}}, {{1, 0, 0}}, 1).recall == 1.0);
  const auto r = topk_recall({{0.3, 0.2}, {0.1, 0.9}, {0.5, 0.4}}, {{0, 0}, {1, 0}, {0, 1}}, 1);
  CHECK(r.evaluated == 2);
  CHECK(r.skipped == 1);
  CHECK(r.recall == 0.0);
}

TEST_CASE("metrics agree with brute force on random cases") {
  Rng rng(2024);
  for (int i = 0; i < 200; ++i) {
    const auto c = random_case(rng, i % 2 == 0);
    CHECK(std::abs(auc(c.scores, c.labels) - oracle::auc(c.scores, c.labels)) <= 1e-12);
    CHECK(std::abs(aupr(c.scores, c.labels) - oracle::average_precision(c.scores, c.labels)) <= 1e-12);

    std::vector<std::vector<double>> s(4), y(4);
    for (std::size_t k = 0; k < c.scores.size(); ++k) {
      s[k % 4].push_back(c.scores[k]);
      y[k % 4].push_back(c.labels[k]);
    }
    const std::size_t w = s[3].size();
    for (auto* m : {&s, &y})
      for (auto& row : *m) row.resize(w);
    for (std::size_t k : {1u, 3u, 7u}) {
      const auto got = topk_recall(s, y, k);
      bool any = false;
      for (const auto& row : y)
        for (double v : row) any = any || v == 1.0;
      if (any) CHECK(std::abs(got.recall - oracle::topk_recall(s, y, k)) <= 1e-12);
    }
  }
}

TEST_CASE("strictly increasing transforms leave metrics unchanged") {
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    auto c = random_case(rng, i % 3 == 0);
    for (auto& v : c.scores) v -= 0.5;
    auto t = c.scores;
    for (auto& v : t) v = v * v * v + 2.0 * v;
    CHECK(auc(t, c.labels) == auc(c.scores, c.labels));
    CHECK(aupr(t, c.labels) == doctest::Approx(aupr(c.scores, c.labels)).epsilon(1e-15));
    const std::vector<std::vector<double>> s{c.scores}, st{t}, y{c.labels};
    CHECK(topk_recall(st, y, 5).recall == topk_recall(s, y, 5).recall);
  }
}

TEST_CASE("micro pooling matches the flattened pair list") {
  Rng rng(8);
  std::vector<std::vector<double>> s(30, std::vector<double>(6)), y(30, std::vector<double>(6));
  std::vector<double> flat_s, flat_y, col_s, col_y;
  for (auto& row : s)
    for (auto& v : row) v = std::round(rng.uniform(0.0, 20.0)) / 20.0;
  for (auto& row : y)
    for (auto& v : row) v = rng.bernoulli(0.3) ? 1.0 : 0.0;
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t c = 0; c < 6; ++c) {
      flat_s.push_back(s[i][c]);
      flat_y.push_back(y[i][c]);
    }
  for (std::size_t c = 0; c < 6; ++c)
    for (std::size_t i = 0; i < 30; ++i) {
      col_s.push_back(s[i][c]);
      col_y.push_back(y[i][c]);
    }
  const auto m = evaluate_scores(s, y);
  CHECK(m.auc == auc(flat_s, flat_y));
  CHECK(m.auc == auc(col_s, col_y));
  CHECK(m.aupr == doctest::Approx(aupr(col_s, col_y)).epsilon(1e-14));
  for (std::size_t k = 0; k < kRecallKs.size(); ++k) CHECK(m.recall[k] == topk_recall(s, y, kRecallKs[k]).recall);
}

TEST_CASE("mean and sample standard deviation") {
  const auto one = mean_std(std::vector<double>{0.4});
  CHECK(one.mean == 0.4);
  CHECK(one.std == 0.0);
  const auto ms = mean_std(std::vector<double>{1.0, 2.0, 3.0, 4.0});
  CHECK(ms.mean == 2.5);
  CHECK(ms.std == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));

  std::vector<EvalMetrics> runs(3);
  for (std::size_t i = 0; i < 3; ++i) {
    runs[i].auc = 0.8 + 0.01 * static_cast<double>(i);
    runs[i].aupr = 0.4;
  }
  const auto sum = summarize(runs);
  CHECK(sum.auc.mean == doctest::Approx(0.81).epsilon(1e-15));
  CHECK(sum.auc.std == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(sum.aupr.std <= 1e-15);
}
