// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "catnet/model.hpp"
#include "catnet/trainer.hpp"

namespace catnet::cli {

/// Settings shared by train, eval and ablate. JSON layout:
/// {task, mode, backbone, paths: {data, vocab, model, output_dir},
///  model: {embed_dim, time_hidden, hidden, demo_dim, time_scale, dropout},
///  train: {epochs, lr, batch_size, beta1, beta2, eps}, seeds: [..], drops: [..]}
/// Every key is optional.
struct RunConfig {
  TaskSpec task{TaskTarget::Med, AttentionMode::TaskAware};
  CellKind backbone = CellKind::Gru;

  std::filesystem::path data;
  std::filesystem::path vocab;
  std::filesystem::path model;
  std::filesystem::path output_dir;

  std::size_t embed_dim = 16;
  std::size_t time_hidden = 16;
  std::size_t hidden = 64;
  std::size_t demo_dim = 8;
  double time_scale = 30.0;
  double dropout = 0.3;

  TrainConfig train;
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::string> drops;

  static RunConfig from_json(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);
  std::string to_json() const;

  /// Hash of everything that affects a fitted model (paths excluded).
  std::string hash() const;

  ModelConfig model_config(const VocabSpec& vocab) const;
  void validate() const;
};

}  // namespace catnet::cli
