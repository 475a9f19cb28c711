// SPDX-License-Identifier: Apache-2.0
#include "catnet/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "catnet/error.hpp"
#include "catnet/rng.hpp"
#include "json.hpp"

namespace catnet {

using ojson = nlohmann::ordered_json;

std::string_view event_key(EventType t) noexcept {
  switch (t) {
    case EventType::Med: return "med";
    case EventType::Diag: return "diag";
    case EventType::Lab: return "lab";
    case EventType::Proc: return "proc";
  }
  return "?";
}

std::optional<EventType> parse_event_type(std::string_view key) noexcept {
  if (key == "med" || key == "medication") return EventType::Med;
  if (key == "diag" || key == "diagnosis") return EventType::Diag;
  if (key == "lab" || key == "labtest") return EventType::Lab;
  if (key == "proc" || key == "procedure") return EventType::Proc;
  return std::nullopt;
}

std::size_t VocabSpec::offset(EventType t) const noexcept {
  std::size_t off = 0;
  for (std::size_t i = 0; i < index_of(t); ++i) off += sizes[i];
  return off;
}

std::string VocabSpec::code_name(EventType t, std::size_t code) const {
  const auto& n = names[index_of(t)];
  if (code < n.size() && !n[code].empty()) return n[code];
  return std::string(event_key(t)) + "_" + std::to_string(code);
}

void VocabSpec::validate() const {
  if (total() < 1) throw DataError("vocabulary must contain at least one code");
  for (auto t : kEventTypes) {
    const auto& n = names[index_of(t)];
    if (!n.empty() && n.size() != size(t))
      throw DataError("vocabulary names for '" + std::string(event_key(t)) + "' have " + std::to_string(n.size()) +
                      " entries, expected " + std::to_string(size(t)));
  }
}

bool Visit::has(EventType t, std::uint32_t code) const noexcept {
  const auto& c = codes_of(t);
  return std::binary_search(c.begin(), c.end(), code);
}

std::size_t Visit::code_count() const noexcept {
  return codes[0].size() + codes[1].size() + codes[2].size() + codes[3].size();
}

std::array<double, 3> Demographics::encode() const noexcept {
  return {age_years / 100.0, sex == Sex::Female ? 1.0 : 0.0, sex == Sex::Male ? 1.0 : 0.0};
}

void validate_record(const PatientRecord& record, const VocabSpec& vocab) {
  const auto fail = [&](const std::string& what) {
    throw DataError("patient '" + record.patient_id + "': " + what);
  };
  if (record.patient_id.empty()) throw DataError("patient_id must be non-empty");
  const double age = record.demographics.age_years;
  if (!std::isfinite(age) || age < 0.0 || age > 120.0) fail("age_years must lie in [0, 120]");
  if (record.visits.size() < 2) fail("at least two visits are required, got " + std::to_string(record.visits.size()));
  for (std::size_t i = 0; i < record.visits.size(); ++i) {
    const auto& v = record.visits[i];
    if (!std::isfinite(v.time_days) || v.time_days < 0.0) fail("visit " + std::to_string(i) + " has invalid time");
    if (i > 0 && !(v.time_days > record.visits[i - 1].time_days))
      fail("visit times must be strictly increasing (visit " + std::to_string(i) + ")");
    for (auto t : kEventTypes) {
      const auto& codes = v.codes_of(t);
      for (std::size_t k = 0; k < codes.size(); ++k) {
        if (codes[k] >= vocab.size(t))
          fail("visit " + std::to_string(i) + " " + std::string(event_key(t)) + " code " + std::to_string(codes[k]) +
               " exceeds vocabulary size " + std::to_string(vocab.size(t)));
        if (k > 0 && codes[k] <= codes[k - 1])
          fail("visit " + std::to_string(i) + " " + std::string(event_key(t)) + " codes must be sorted and unique");
      }
    }
  }
}

std::string record_to_json_line(const PatientRecord& record) {
  ojson j;
  j["patient_id"] = record.patient_id;
  j["demographics"] = {{"age_years", record.demographics.age_years},
                       {"sex", record.demographics.sex == Sex::Female ? "F" : "M"}};
  j["mortality"] = record.mortality ? 1 : 0;
  ojson visits = ojson::array();
  for (const auto& v : record.visits) {
    ojson codes;
    for (auto t : kEventTypes) codes[std::string(event_key(t))] = v.codes_of(t);
    visits.push_back({{"time_days", v.time_days}, {"codes", codes}});
  }
  j["visits"] = std::move(visits);
  return j.dump();
}

PatientRecord record_from_json_line(std::string_view line) {
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const ojson::parse_error& e) {
    throw DataError(std::string("malformed JSON: ") + e.what());
  }
  try {
    PatientRecord r;
    r.patient_id = j.at("patient_id").get<std::string>();
    const auto& demo = j.at("demographics");
    r.demographics.age_years = demo.at("age_years").get<double>();
    const auto sex = demo.at("sex").get<std::string>();
    if (sex == "F")
      r.demographics.sex = Sex::Female;
    else if (sex == "M")
      r.demographics.sex = Sex::Male;
    else
      throw DataError("patient '" + r.patient_id + "': sex must be \"F\" or \"M\"");
    const auto& mort = j.at("mortality");
    if (mort.is_boolean())
      r.mortality = mort.get<bool>();
    else {
      const auto m = mort.get<int>();
      if (m != 0 && m != 1) throw DataError("patient '" + r.patient_id + "': mortality must be 0 or 1");
      r.mortality = m == 1;
    }
    for (const auto& jv : j.at("visits")) {
      Visit v;
      v.time_days = jv.at("time_days").get<double>();
      const auto& codes = jv.at("codes");
      for (auto it = codes.begin(); it != codes.end(); ++it) {
        const auto type = parse_event_type(it.key());
        if (!type) throw DataError("patient '" + r.patient_id + "': unknown event type '" + it.key() + "'");
        v.codes_of(*type) = it.value().get<std::vector<std::uint32_t>>();
      }
      r.visits.push_back(std::move(v));
    }
    return r;
  } catch (const ojson::exception& e) {
    throw DataError(std::string("invalid record: ") + e.what());
  }
}

std::string vocab_to_json(const VocabSpec& vocab) {
  ojson j;
  for (auto t : kEventTypes) j[std::string(event_key(t))] = vocab.size(t);
  ojson names = ojson::object();
  for (auto t : kEventTypes)
    if (!vocab.names[index_of(t)].empty()) names[std::string(event_key(t))] = vocab.names[index_of(t)];
  if (!names.empty()) j["names"] = names;
  return j.dump(2);
}

VocabSpec vocab_from_json(std::string_view text) {
  try {
    const auto j = ojson::parse(text);
    VocabSpec v;
    for (auto t : kEventTypes) v.sizes[index_of(t)] = j.value(std::string(event_key(t)), std::size_t{0});
    if (j.contains("names")) {
      for (auto it = j["names"].begin(); it != j["names"].end(); ++it) {
        const auto type = parse_event_type(it.key());
        if (!type) throw DataError("vocab names: unknown event type '" + it.key() + "'");
        v.names[index_of(*type)] = it.value().get<std::vector<std::string>>();
      }
    }
    v.validate();
    return v;
  } catch (const ojson::exception& e) {
    throw DataError(std::string("malformed vocabulary: ") + e.what());
  }
}

namespace {

std::filesystem::path sidecar(const std::filesystem::path& data_path, const std::filesystem::path& vocab_path) {
  if (!vocab_path.empty()) return vocab_path;
  return data_path.parent_path() / "vocab.json";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Cohort load_dataset(const std::filesystem::path& data_path, const std::filesystem::path& vocab_path) {
  Cohort cohort;
  cohort.vocab = vocab_from_json(read_file(sidecar(data_path, vocab_path)));
  std::ifstream in(data_path);
  if (!in) throw DataError("cannot open " + data_path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto record = record_from_json_line(line);
      validate_record(record, cohort.vocab);
      cohort.patients.push_back(std::move(record));
    } catch (const DataError& e) {
      throw DataError(data_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cohort;
}

void save_dataset(const Cohort& cohort, const std::filesystem::path& data_path,
                  const std::filesystem::path& vocab_path) {
  if (data_path.has_parent_path()) std::filesystem::create_directories(data_path.parent_path());
  std::ofstream out(data_path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + data_path.string());
  for (const auto& r : cohort.patients) out << record_to_json_line(r) << '\n';
  std::ofstream vout(sidecar(data_path, vocab_path), std::ios::binary | std::ios::trunc);
  if (!vout) throw DataError("cannot write vocabulary sidecar");
  vout << vocab_to_json(cohort.vocab) << '\n';
}

DatasetSplit split_dataset(const std::vector<PatientRecord>& records, std::uint64_t seed) {
  const std::size_t n = records.size();
  if (n < 10) throw DataError("split_dataset needs at least 10 records, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::substream(seed, 0x5117);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);

  const std::size_t n_test = n / 10;
  const std::size_t n_val = n / 10;
  DatasetSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records[order[i]];
    if (i < n_test)
      split.test.push_back(r);
    else if (i < n_test + n_val)
      split.val.push_back(r);
    else
      split.train.push_back(r);
  }
  return split;
}

IntervalView derive_intervals(const std::vector<Visit>& visits) {
  IntervalView view;
  if (visits.empty()) return view;
  view.delta_prev_days.reserve(visits.size());
  view.delta_global_days.reserve(visits.size());
  view.delta_prev_days.push_back(0.0);
  view.delta_global_days.push_back(0.0);
  for (std::size_t i = 1; i < visits.size(); ++i) {
    const double gap = visits[i].time_days - visits[i - 1].time_days;
    if (!(gap > 0.0)) throw DataError("visit times must be strictly increasing (visit " + std::to_string(i) + ")");
    view.delta_prev_days.push_back(gap);
    view.delta_global_days.push_back(visits[i].time_days - visits[0].time_days);
  }
  return view;
}

std::string_view task_key(TaskTarget t) noexcept {
  switch (t) {
    case TaskTarget::Med: return "med";
    case TaskTarget::Diag: return "diag";
    case TaskTarget::Lab: return "lab";
    case TaskTarget::Proc: return "proc";
    case TaskTarget::Mortality: return "mortality";
  }
  return "?";
}

std::optional<TaskTarget> parse_task(std::string_view key) noexcept {
  if (key == "mortality") return TaskTarget::Mortality;
  if (auto t = parse_event_type(key)) return static_cast<TaskTarget>(index_of(*t));
  return std::nullopt;
}

std::string_view mode_key(AttentionMode m) noexcept {
  return m == AttentionMode::TaskAware ? "task-aware" : "task-unaware";
}

std::optional<AttentionMode> parse_mode(std::string_view key) noexcept {
  if (key == "task-aware") return AttentionMode::TaskAware;
  if (key == "task-unaware") return AttentionMode::TaskUnaware;
  return std::nullopt;
}

EventType TaskSpec::target_type() const {
  if (is_mortality()) throw ConfigError("mortality task has no target event type");
  return static_cast<EventType>(static_cast<std::uint8_t>(target));
}

std::size_t TaskSpec::output_width(const VocabSpec& vocab) const {
  return is_mortality() ? 1 : vocab.size(target_type());
}

void TaskSpec::validate() const {
  if (is_mortality() && mode == AttentionMode::TaskAware) throw ConfigError("mode forbidden for task");
}

TaskInstance extract_task_instance(const PatientRecord& record, const TaskSpec& task, const VocabSpec& vocab) {
  TaskInstance inst;
  const auto d = record.demographics.encode();
  std::copy(d.begin(), d.end(), inst.demographics.begin());
  if (task.is_mortality()) {
    if (record.visits.empty()) throw DataError("patient '" + record.patient_id + "': no visits");
    inst.inputs = record.visits;
    inst.target = {record.mortality ? 1.0 : 0.0};
  } else {
    if (record.visits.size() < 2)
      throw DataError("patient '" + record.patient_id + "': code prediction needs at least two visits");
    inst.inputs.assign(record.visits.begin(), record.visits.end() - 1);
    const auto type = task.target_type();
    inst.target.assign(vocab.size(type), 0.0);
    for (auto c : record.visits.back().codes_of(type)) {
      if (c >= inst.target.size()) throw DataError("patient '" + record.patient_id + "': target code out of range");
      inst.target[c] = 1.0;
    }
  }
  inst.intervals = derive_intervals(inst.inputs);
  return inst;
}

std::vector<TaskInstance> extract_task_instances(const std::vector<PatientRecord>& records, const TaskSpec& task,
                                                 const VocabSpec& vocab) {
  std::vector<TaskInstance> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(extract_task_instance(r, task, vocab));
  return out;
}

}  // namespace catnet
