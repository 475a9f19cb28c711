// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "catnet/trainer.hpp"

namespace catnet {

enum class Drop : std::uint8_t { CrossAttention, VisitAttention, GlobalGate, Diag, Lab, Proc, Time, AllAuxiliary };

std::string_view drop_key(Drop d) noexcept;
std::optional<Drop> parse_drop(std::string_view key) noexcept;

struct AblationSpec {
  std::vector<Drop> drops;

  /// Throws ConfigError on an unknown name or a repeated drop.
  static AblationSpec parse(const std::vector<std::string>& names);
};

/// Variant name used in reports: "full" or "w/o_<drop>".
std::string variant_name(std::optional<Drop> drop);

/// Model configuration with the architectural substitute for `drop` applied.
ModelConfig apply_drop(ModelConfig config, Drop drop);

/// Removes the event types `drop` excludes from every visit; identity for architectural drops.
/// Throws ConfigError when the drop would remove the task's own history.
std::vector<PatientRecord> strip_event_types(const std::vector<PatientRecord>& records, Drop drop,
                                             const TaskSpec& task);

struct SeedRun {
  std::uint64_t seed = 0;
  EvalMetrics metrics;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
};

struct VariantReport {
  std::string variant;
  std::vector<SeedRun> runs;
  MetricsSummary summary;
};

struct AblationReport {
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  std::vector<VariantReport> rows;  // full model first, then drops in spec order
};

struct AblationOptions {
  /// Worker threads; 0 reads CATNET_THREADS (default 1).
  std::size_t threads = 0;
};

/// Threads requested by CATNET_THREADS; 1 when unset or invalid.
std::size_t threads_from_env();

/// For every variant and seed: split the cohort with that seed, fit on train
/// with val selection, and score the test split. Results do not depend on
/// the thread count.
AblationReport run_ablation(const ModelConfig& base, const TrainConfig& train, const AblationSpec& spec,
                            const std::vector<PatientRecord>& records, const std::vector<std::uint64_t>& seeds,
                            const AblationOptions& options = {});

inline constexpr std::string_view kMetricsHeader = "variant,seed,auc,aupr,recall@10,recall@20,recall@30,recall@40,recall@50";

std::string metrics_csv_row(const std::string& variant, std::uint64_t seed, const EvalMetrics& m);
std::string metrics_csv(const AblationReport& report);
/// `{config_hash, seeds, variants: [{variant, auc: {mean, std, values}, ...}]}`
std::string summary_json(const AblationReport& report);
/// One JSON object per epoch tagged with variant and seed.
std::string training_log_jsonl(const AblationReport& report);
/// Human-readable "metric mean ± std" table.
std::string summary_table(const AblationReport& report);

}  // namespace catnet
