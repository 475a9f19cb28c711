// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "catnet/adam.hpp"
#include "catnet/metrics.hpp"
#include "catnet/model.hpp"

namespace catnet {

struct TrainConfig {
  std::size_t epochs = 100;
  double lr = 1e-4;
  std::size_t batch_size = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;

  AdamConfig adam() const { return {lr, beta1, beta2, eps}; }
  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::optional<double> val_auc;  // empty when validation has a single class
};

std::string epoch_log_json(const EpochLog& log);

struct FitResult {
  CatNetModel model;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains with Adam on shuffled mini-batches and keeps the parameters from the
/// epoch with the highest validation AUC (lowest validation loss when AUC is
/// undefined). Throws NumericError naming the epoch and batch on a non-finite loss.
FitResult fit(const std::vector<TaskInstance>& train, const std::vector<TaskInstance>& val,
              const ModelConfig& model_config, const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Mean clamped BCE over every (instance, output) pair.
double mean_bce(const std::vector<std::vector<double>>& probs, const std::vector<std::vector<double>>& targets);

/// Mean BCE of the model over instances in eval mode.
double mean_loss(CatNetModel& model, const std::vector<TaskInstance>& instances);

EvalMetrics evaluate(CatNetModel& model, const std::vector<TaskInstance>& instances);

/// Scores every instance with the per-code positive rate of `reference`.
std::vector<std::vector<double>> prevalence_scores(const std::vector<TaskInstance>& reference,
                                                   const std::vector<TaskInstance>& instances);

std::vector<std::vector<double>> targets_of(const std::vector<TaskInstance>& instances);

}  // namespace catnet
