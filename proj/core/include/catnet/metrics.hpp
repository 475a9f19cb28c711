// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <span>
#include <vector>

namespace catnet {

/// Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 P(tie). Labels are 0/1.
/// Throws NumericError("AUC undefined") unless both classes are present.
double auc(std::span<const double> scores, std::span<const double> labels);

/// Average precision: mean over positives of the precision at that positive's
/// score threshold (tied scores share one threshold). Throws without positives.
double aupr(std::span<const double> scores, std::span<const double> labels);

struct TopKRecall {
  double recall = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // instances with no true code
};

/// Per-instance |top-k ∩ true| / |true| averaged over instances; ties broken by
/// ascending code index.
TopKRecall topk_recall(const std::vector<std::vector<double>>& scores, const std::vector<std::vector<double>>& labels,
                       std::size_t k);

inline constexpr std::array<std::size_t, 5> kRecallKs = {10, 20, 30, 40, 50};

struct EvalMetrics {
  double auc = 0.0;
  double aupr = 0.0;
  std::array<double, kRecallKs.size()> recall{};
  std::size_t recall_skipped = 0;
};

/// Micro-pooled AUC/AUPR over every (instance, code) pair plus top-k recalls.
/// Top-k recall is only defined for multi-code targets and is left at 0 for
/// single-output tasks.
EvalMetrics evaluate_scores(const std::vector<std::vector<double>>& scores,
                            const std::vector<std::vector<double>>& labels);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single run
};

MeanStd mean_std(std::span<const double> values);

struct MetricsSummary {
  MeanStd auc;
  MeanStd aupr;
  std::array<MeanStd, kRecallKs.size()> recall{};
};

MetricsSummary summarize(std::span<const EvalMetrics> runs);

}  // namespace catnet
