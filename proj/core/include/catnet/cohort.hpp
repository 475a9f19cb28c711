// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace catnet {

enum class EventType : std::uint8_t { Med = 0, Diag = 1, Lab = 2, Proc = 3 };

inline constexpr std::size_t kNumEventTypes = 4;
inline constexpr std::array<EventType, kNumEventTypes> kEventTypes = {EventType::Med, EventType::Diag,
                                                                      EventType::Lab, EventType::Proc};

constexpr std::size_t index_of(EventType t) noexcept { return static_cast<std::size_t>(t); }
/// "med", "diag", "lab" or "proc".
std::string_view event_key(EventType t) noexcept;
std::optional<EventType> parse_event_type(std::string_view key) noexcept;

struct VocabSpec {
  std::array<std::size_t, kNumEventTypes> sizes{};
  /// Optional display names; an empty vector means unnamed.
  std::array<std::vector<std::string>, kNumEventTypes> names{};

  std::size_t size(EventType t) const noexcept { return sizes[index_of(t)]; }
  std::size_t total() const noexcept { return sizes[0] + sizes[1] + sizes[2] + sizes[3]; }
  /// Offset of the first code of type t in the concatenated med|diag|lab|proc layout.
  std::size_t offset(EventType t) const noexcept;
  std::string code_name(EventType t, std::size_t code) const;
  void validate() const;

  friend bool operator==(const VocabSpec&, const VocabSpec&) = default;
};

struct Visit {
  double time_days = 0.0;
  /// Sorted, duplicate-free code indices per event type.
  std::array<std::vector<std::uint32_t>, kNumEventTypes> codes{};

  const std::vector<std::uint32_t>& codes_of(EventType t) const noexcept { return codes[index_of(t)]; }
  std::vector<std::uint32_t>& codes_of(EventType t) noexcept { return codes[index_of(t)]; }
  bool has(EventType t, std::uint32_t code) const noexcept;
  std::size_t code_count() const noexcept;

  friend bool operator==(const Visit&, const Visit&) = default;
};

enum class Sex : std::uint8_t { Female, Male };

struct Demographics {
  double age_years = 0.0;
  Sex sex = Sex::Female;

  /// Raw demographic vector S = (age_years / 100, is_female, is_male).
  std::array<double, 3> encode() const noexcept;

  friend bool operator==(const Demographics&, const Demographics&) = default;
};

inline constexpr std::size_t kDemographicWidth = 3;

struct PatientRecord {
  std::string patient_id;
  Demographics demographics;
  std::vector<Visit> visits;
  bool mortality = false;

  friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

/// Checks every record invariant against the vocabulary; throws DataError naming the patient.
void validate_record(const PatientRecord& record, const VocabSpec& vocab);

struct Cohort {
  VocabSpec vocab;
  std::vector<PatientRecord> patients;
};

// JSONL: one patient per line; vocabulary in a vocab.json sidecar.
std::string record_to_json_line(const PatientRecord& record);
PatientRecord record_from_json_line(std::string_view line);
std::string vocab_to_json(const VocabSpec& vocab);
VocabSpec vocab_from_json(std::string_view text);

/// Loads a dataset. When vocab_path is empty, vocab.json next to the data file is used.
Cohort load_dataset(const std::filesystem::path& data_path, const std::filesystem::path& vocab_path = {});
void save_dataset(const Cohort& cohort, const std::filesystem::path& data_path,
                  const std::filesystem::path& vocab_path = {});

struct DatasetSplit {
  std::vector<PatientRecord> train;
  std::vector<PatientRecord> val;
  std::vector<PatientRecord> test;
};

/// Seeded 8:1:1 partition: |test| = |val| = floor(N / 10), train takes the rest.
DatasetSplit split_dataset(const std::vector<PatientRecord>& records, std::uint64_t seed);

/// Backward-anchored intervals: delta_prev[i] = t_i - t_{i-1} with delta_prev[0] = 0,
/// delta_global[i] = t_i - t_0.
struct IntervalView {
  std::vector<double> delta_prev_days;
  std::vector<double> delta_global_days;
};

IntervalView derive_intervals(const std::vector<Visit>& visits);
inline IntervalView derive_intervals(const PatientRecord& record) { return derive_intervals(record.visits); }

enum class TaskTarget : std::uint8_t { Med, Diag, Lab, Proc, Mortality };
enum class AttentionMode : std::uint8_t { TaskAware, TaskUnaware };

std::string_view task_key(TaskTarget t) noexcept;
std::optional<TaskTarget> parse_task(std::string_view key) noexcept;
std::string_view mode_key(AttentionMode m) noexcept;
std::optional<AttentionMode> parse_mode(std::string_view key) noexcept;

struct TaskSpec {
  TaskTarget target = TaskTarget::Med;
  AttentionMode mode = AttentionMode::TaskAware;

  bool is_mortality() const noexcept { return target == TaskTarget::Mortality; }
  /// Event type predicted by a code task. Throws ConfigError for mortality.
  EventType target_type() const;
  /// Number of predicted outputs (rho).
  std::size_t output_width(const VocabSpec& vocab) const;
  /// Mortality targets a type absent from the history, so task-aware mode is rejected.
  void validate() const;
};

struct TaskInstance {
  std::vector<Visit> inputs;
  IntervalView intervals;
  std::array<double, kDemographicWidth> demographics{};
  std::vector<double> target;
};

/// Code tasks: inputs are visits 1..T-1, target is the multi-hot of the target
/// type at visit T. Mortality: inputs are all visits, target is the flag.
TaskInstance extract_task_instance(const PatientRecord& record, const TaskSpec& task, const VocabSpec& vocab);
std::vector<TaskInstance> extract_task_instances(const std::vector<PatientRecord>& records, const TaskSpec& task,
                                                 const VocabSpec& vocab);

}  // namespace catnet
