// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "catnet/aggregation.hpp"
#include "catnet/backbone.hpp"
#include "catnet/cohort.hpp"
#include "catnet/cross_event_attention.hpp"
#include "catnet/temporal_embedding.hpp"

namespace catnet {

/// Architectural ablations. Each dropped component has a fixed substitute:
/// no_cross -> raw embeddings in the same slot layout; no_visit_attention ->
/// contexts = h; no_global_gate -> gated = 0; no_time -> the interval token is a
/// learned constant vector.
struct AblationFlags {
  bool no_cross = false;
  bool no_visit_attention = false;
  bool no_global_gate = false;
  bool no_time = false;

  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

struct ModelConfig {
  VocabSpec vocab;
  TaskSpec task;
  CellKind cell = CellKind::Gru;
  std::size_t embed_dim = 16;    // n
  std::size_t time_hidden = 16;  // a
  std::size_t hidden = 64;       // b (= global kernel width m)
  std::size_t demo_dim = 8;      // s
  double time_scale = 30.0;      // days per kernel unit
  double dropout = 0.3;
  AblationFlags ablation;

  AttentionSettings attention_settings() const;
  std::size_t visit_width() const;
  void validate() const;

  std::string to_json() const;
  static ModelConfig from_json(std::string_view text);
};

struct ForwardOptions {
  bool training = false;
  Rng* dropout_rng = nullptr;  // required when training with dropout > 0
  bool keep_attention = false;
};

/// Per-visit attention captured during a forward pass.
struct VisitAttentionRecord {
  std::size_t instance = 0;
  std::size_t visit = 0;
  VisitTokenSet tokens;
  std::vector<std::size_t> queries;
  Tensor weights;
};

struct ForwardResult {
  Var probs;  // batch x rho
  std::vector<VisitAttentionRecord> attention;
};

class CatNetModel {
 public:
  CatNetModel(ModelConfig config, std::uint64_t init_seed);

  const ModelConfig& config() const noexcept { return config_; }

  /// Stable order; pointers are invalidated by copying or moving the model.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Parameter& parameter(std::string_view name);
  std::size_t parameter_count() const;
  void zero_grad();

  ForwardResult forward(Tape& tape, std::span<const TaskInstance> batch, const ForwardOptions& options = {});

  /// Eval-mode probabilities, one row per instance.
  std::vector<std::vector<double>> predict(std::span<const TaskInstance> instances, std::size_t batch_size = 64);

  const std::string& config_hash() const noexcept { return config_hash_; }
  void set_config_hash(std::string hash) { config_hash_ = std::move(hash); }

  /// Seed of the run that produced the model (initialization and data split).
  std::uint64_t seed() const noexcept { return seed_; }
  void set_seed(std::uint64_t seed) noexcept { seed_ = seed; }

  /// `{format_version, config_hash, seed, model_config, params: {name: {shape, values}}}`
  std::string to_json() const;
  static CatNetModel from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static CatNetModel load(const std::filesystem::path& path);

  static constexpr int kFormatVersion = 1;

 private:
  ModelConfig config_;
  std::string config_hash_;
  std::uint64_t seed_ = 0;
  CodeEmbeddings embeddings_;
  TimeKernel local_kernel_;
  Parameter time_constant_;  // only used with ablation.no_time
  RecurrentParams rnn_;
  HeadParams head_;
};

/// FNV-1a 64-bit hash rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

}  // namespace catnet
