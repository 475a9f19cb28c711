// SPDX-License-Identifier: Apache-2.0
#include "catnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "catnet/error.hpp"
#include "json.hpp"

namespace catnet {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

std::string epoch_log_json(const EpochLog& log) {
  nlohmann::ordered_json j;
  j["epoch"] = log.epoch;
  j["train_loss"] = log.train_loss;
  j["val_loss"] = log.val_loss;
  j["val_auc"] = log.val_auc ? nlohmann::ordered_json(*log.val_auc) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

std::vector<std::vector<double>> targets_of(const std::vector<TaskInstance>& instances) {
  std::vector<std::vector<double>> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(inst.target);
  return out;
}

double mean_bce(const std::vector<std::vector<double>>& probs, const std::vector<std::vector<double>>& targets) {
  if (probs.empty() || probs.size() != targets.size()) throw ShapeError("mean_bce: instance counts differ");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    for (std::size_t c = 0; c < probs[i].size(); ++c) {
      const double p = std::clamp(probs[i][c], kProbabilityClamp, 1.0 - kProbabilityClamp);
      const double y = targets[i].at(c);
      total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double mean_loss(CatNetModel& model, const std::vector<TaskInstance>& instances) {
  if (instances.empty()) throw DataError("mean_loss: no instances");
  return mean_bce(model.predict(instances), targets_of(instances));
}

EvalMetrics evaluate(CatNetModel& model, const std::vector<TaskInstance>& instances) {
  return evaluate_scores(model.predict(instances), targets_of(instances));
}

std::vector<std::vector<double>> prevalence_scores(const std::vector<TaskInstance>& reference,
                                                   const std::vector<TaskInstance>& instances) {
  if (reference.empty()) throw DataError("prevalence baseline needs reference instances");
  std::vector<double> rate(reference.front().target.size(), 0.0);
  for (const auto& inst : reference)
    for (std::size_t c = 0; c < rate.size(); ++c) rate[c] += inst.target.at(c);
  for (auto& r : rate) r /= static_cast<double>(reference.size());
  return std::vector<std::vector<double>>(instances.size(), rate);
}

namespace {

std::optional<double> try_auc(const std::vector<std::vector<double>>& scores,
                              const std::vector<std::vector<double>>& labels) {
  std::vector<double> s, y;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    s.insert(s.end(), scores[i].begin(), scores[i].end());
    y.insert(y.end(), labels[i].begin(), labels[i].end());
  }
  const bool has_pos = std::find(y.begin(), y.end(), 1.0) != y.end();
  const bool has_neg = std::find(y.begin(), y.end(), 0.0) != y.end();
  if (!has_pos || !has_neg) return std::nullopt;
  return auc(s, y);
}

std::vector<Tensor> snapshot(CatNetModel& model) {
  std::vector<Tensor> out;
  for (auto* p : model.parameters()) out.push_back(p->value);
  return out;
}

void restore(CatNetModel& model, const std::vector<Tensor>& values) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace

FitResult fit(const std::vector<TaskInstance>& train, const std::vector<TaskInstance>& val,
              const ModelConfig& model_config, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  model_config.validate();
  if (train.empty()) throw DataError("fit: empty training split");
  if (val.empty()) throw DataError("fit: empty validation split");

  FitResult result{CatNetModel(model_config, config.seed), {}, 0};
  CatNetModel& model = result.model;
  Adam optimizer(model.parameters(), config.adam());
  const auto val_targets = targets_of(val);

  std::vector<std::size_t> order(train.size());
  std::vector<Tensor> best = snapshot(model);
  double best_auc = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  bool best_by_auc = false;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = Rng::substream(config.seed, 0x5a0f, epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.index(i)]);
    Rng dropout = Rng::substream(config.seed, 0xd409, epoch);

    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<TaskInstance> batch;
      std::vector<double> flat_targets;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train[order[i]]);
        const auto& y = train[order[i]].target;
        flat_targets.insert(flat_targets.end(), y.begin(), y.end());
      }
      const std::size_t width = flat_targets.size() / batch.size();
      const Tensor targets = Tensor::matrix(batch.size(), width, std::move(flat_targets));
      double loss_value = 0.0;
      try {
        Tape tape;
        ForwardOptions opts;
        opts.training = true;
        opts.dropout_rng = &dropout;
        auto res = model.forward(tape, batch, opts);
        Var loss = bce_loss(tape, res.probs, targets);
        loss_value = tape.value(loss)[0];
        model.zero_grad();
        tape.backward(loss);
      } catch (const NumericError& e) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index) + " (training rows " + std::to_string(start) + ".." +
                           std::to_string(end - 1) + "): " + e.what());
      }
      optimizer.step();
      loss_sum += loss_value * static_cast<double>(end - start);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(train.size());
    const auto val_probs = model.predict(val);
    entry.val_loss = mean_bce(val_probs, val_targets);
    entry.val_auc = try_auc(val_probs, val_targets);

    bool improved = false;
    if (entry.val_auc) {
      if (!best_by_auc || *entry.val_auc > best_auc) improved = true;
    } else if (!best_by_auc && entry.val_loss < best_loss) {
      improved = true;
    }
    if (improved) {
      if (entry.val_auc) {
        best_by_auc = true;
        best_auc = *entry.val_auc;
      }
      best_loss = entry.val_loss;
      best = snapshot(model);
      result.best_epoch = epoch;
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  restore(model, best);
  return result;
}

}  // namespace catnet
