// SPDX-License-Identifier: Apache-2.0
#include "catnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "catnet/error.hpp"

namespace catnet {

namespace {

void check_inputs(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size())
    throw ShapeError("metric inputs differ in length: " + std::to_string(scores.size()) + " scores, " +
                     std::to_string(labels.size()) + " labels");
  for (double y : labels)
    if (y != 0.0 && y != 1.0) throw DataError("labels must be 0 or 1");
}

std::vector<std::size_t> order_by_score_desc(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const double> labels) {
  check_inputs(scores, labels);
  const auto idx = order_by_score_desc(scores);
  // Walk tie groups from the top, counting negatives ranked strictly below each positive.
  double n_pos = 0.0, n_neg = 0.0;
  for (double y : labels) (y == 1.0 ? n_pos : n_neg) += 1.0;
  if (n_pos == 0.0 || n_neg == 0.0) throw NumericError("AUC undefined: need both positive and negative labels");

  double wins = 0.0;
  double neg_above = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    double pos_group = 0.0, neg_group = 0.0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] == 1.0 ? pos_group : neg_group) += 1.0;
      ++j;
    }
    const double neg_below = n_neg - neg_above - neg_group;
    wins += pos_group * (neg_below + 0.5 * neg_group);
    neg_above += neg_group;
    i = j;
  }
  return wins / (n_pos * n_neg);
}

double aupr(std::span<const double> scores, std::span<const double> labels) {
  check_inputs(scores, labels);
  const double n_pos = std::count(labels.begin(), labels.end(), 1.0);
  if (n_pos == 0.0) throw NumericError("AUPR undefined: no positive labels");
  const auto idx = order_by_score_desc(scores);
  double tp = 0.0, seen = 0.0, total = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    double pos_group = 0.0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      pos_group += labels[idx[j]];
      ++j;
    }
    seen += static_cast<double>(j - i);
    tp += pos_group;
    total += pos_group * (tp / seen);
    i = j;
  }
  return total / n_pos;
}

TopKRecall topk_recall(const std::vector<std::vector<double>>& scores, const std::vector<std::vector<double>>& labels,
                       std::size_t k) {
  if (k == 0) throw DataError("top-k recall needs k >= 1");
  if (scores.size() != labels.size()) throw ShapeError("top-k recall: instance counts differ");
  TopKRecall out;
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    const auto& y = labels[i];
    if (s.size() != y.size()) throw ShapeError("top-k recall: score/label widths differ");
    const double n_true = std::count(y.begin(), y.end(), 1.0);
    if (n_true == 0.0) {
      ++out.skipped;
      continue;
    }
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // stable sort keeps ascending code order among ties
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s[a] > s[b]; });
    double hits = 0.0;
    for (std::size_t r = 0; r < std::min(k, idx.size()); ++r) hits += y[idx[r]];
    sum += hits / n_true;
    ++out.evaluated;
  }
  out.recall = out.evaluated ? sum / static_cast<double>(out.evaluated) : 0.0;
  return out;
}

EvalMetrics evaluate_scores(const std::vector<std::vector<double>>& scores,
                            const std::vector<std::vector<double>>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("evaluate_scores: instance counts differ");
  std::vector<double> flat_s, flat_y;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != labels[i].size()) throw ShapeError("evaluate_scores: widths differ");
    flat_s.insert(flat_s.end(), scores[i].begin(), scores[i].end());
    flat_y.insert(flat_y.end(), labels[i].begin(), labels[i].end());
  }
  EvalMetrics m;
  m.auc = auc(flat_s, flat_y);
  m.aupr = aupr(flat_s, flat_y);
  if (!scores.empty() && scores[0].size() > 1) {
    for (std::size_t i = 0; i < kRecallKs.size(); ++i) {
      const auto r = topk_recall(scores, labels, kRecallKs[i]);
      m.recall[i] = r.recall;
      m.recall_skipped = r.skipped;
    }
  }
  return m;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw DataError("mean_std of an empty sample");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  MeanStd out;
  out.mean = sum / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

MetricsSummary summarize(std::span<const EvalMetrics> runs) {
  std::vector<double> a, p;
  std::array<std::vector<double>, kRecallKs.size()> r;
  for (const auto& m : runs) {
    a.push_back(m.auc);
    p.push_back(m.aupr);
    for (std::size_t i = 0; i < r.size(); ++i) r[i].push_back(m.recall[i]);
  }
  MetricsSummary s;
  s.auc = mean_std(a);
  s.aupr = mean_std(p);
  for (std::size_t i = 0; i < r.size(); ++i) s.recall[i] = mean_std(r[i]);
  return s;
}

}  // namespace catnet
