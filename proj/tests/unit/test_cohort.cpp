// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <set>

#include "catnet/error.hpp"
#include "catnet/synth.hpp"
#include "doctest.h"

using namespace catnet;
namespace fs = std::filesystem;

namespace {

VocabSpec small_vocab() {
  VocabSpec v;
  v.sizes = {4, 3, 2, 2};
  return v;
}

Visit visit_at(double t, std::vector<std::uint32_t> med, std::vector<std::uint32_t> diag = {}) {
  Visit v;
  v.time_days = t;
  v.codes_of(EventType::Med) = std::move(med);
  v.codes_of(EventType::Diag) = std::move(diag);
  return v;
}

PatientRecord three_visit_record() {
  PatientRecord r;
  r.patient_id = "A";
  r.demographics = {70.0, Sex::Male};
  r.visits = {visit_at(0, {0}, {1}), visit_at(3, {1, 2}), visit_at(10, {3}, {0, 2})};
  r.mortality = true;
  return r;
}

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("catnet_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("records outside the invariants are rejected") {
  const auto vocab = small_vocab();
  auto r = three_visit_record();
  CHECK_NOTHROW(validate_record(r, vocab));

  auto one = r;
  one.visits.resize(1);
  CHECK_THROWS_AS(validate_record(one, vocab), DataError);

  auto big = r;
  big.visits[0].codes_of(EventType::Med) = {4};
  CHECK_THROWS_AS(validate_record(big, vocab), DataError);

  auto unsorted = r;
  unsorted.visits[1].codes_of(EventType::Med) = {2, 1};
  CHECK_THROWS_AS(validate_record(unsorted, vocab), DataError);

  auto dup = r;
  dup.visits[1].codes_of(EventType::Med) = {1, 1};
  CHECK_THROWS_AS(validate_record(dup, vocab), DataError);

  auto still = r;
  still.visits[2].time_days = 3;
  CHECK_THROWS_AS(validate_record(still, vocab), DataError);

  auto old = r;
  old.demographics.age_years = 130;
  CHECK_THROWS_AS(validate_record(old, vocab), DataError);
}

TEST_CASE("json line round trip") {
  auto r = three_visit_record();
  r.visits[1].time_days = 3.125;
  CHECK(record_from_json_line(record_to_json_line(r)) == r);
  const auto vocab = small_vocab();
  CHECK(vocab_from_json(vocab_to_json(vocab)) == vocab);
}

TEST_CASE("dataset save then load is the identity") {
  auto config = default_gen_config();
  config.n_patients = 40;
  const Cohort cohort = generate(config, 5);
  const auto dir = temp_dir("roundtrip");
  save_dataset(cohort, dir / "cohort.jsonl");
  const Cohort back = load_dataset(dir / "cohort.jsonl");
  CHECK(back.vocab == cohort.vocab);
  CHECK(back.patients == cohort.patients);
}

TEST_CASE("loading reports the offending line") {
  const auto dir = temp_dir("badline");
  const auto vocab = small_vocab();
  {
    std::ofstream(dir / "vocab.json") << vocab_to_json(vocab);
    auto r = three_visit_record();
    auto bad = r;
    bad.patient_id = "B";
    bad.visits.resize(1);
    std::ofstream out(dir / "cohort.jsonl");
    out << record_to_json_line(r) << "\n" << record_to_json_line(bad) << "\n";
  }
  try {
    load_dataset(dir / "cohort.jsonl");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":2:") != std::string::npos);
    CHECK(msg.find("B") != std::string::npos);
  }
}

TEST_CASE("split sizes follow the floor rule") {
  auto config = default_gen_config();
  for (std::size_t n : {10u, 11u, 19u, 20u, 123u}) {
    config.n_patients = n;
    const auto cohort = generate(config, 1);
    const auto s = split_dataset(cohort.patients, 3);
    CHECK(s.test.size() == n / 10);
    CHECK(s.val.size() == n / 10);
    CHECK(s.train.size() == n - 2 * (n / 10));
  }
}

TEST_CASE("split of 5438 records") {
  std::vector<PatientRecord> records(5438);
  for (std::size_t i = 0; i < records.size(); ++i) records[i].patient_id = std::to_string(i);
  const auto s = split_dataset(records, 42);
  CHECK(s.train.size() == 4352);
  CHECK(s.val.size() == 543);
  CHECK(s.test.size() == 543);
}

TEST_CASE("split partitions the input deterministically") {
  auto config = default_gen_config();
  config.n_patients = 57;
  const auto cohort = generate(config, 1);
  const auto a = split_dataset(cohort.patients, 8);
  const auto b = split_dataset(cohort.patients, 8);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);

  std::multiset<std::string> ids;
  for (const auto* part : {&a.train, &a.val, &a.test})
    for (const auto& r : *part) ids.insert(r.patient_id);
  CHECK(ids.size() == 57);
  CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == 57);

  const auto c = split_dataset(cohort.patients, 9);
  CHECK_FALSE(c.test == a.test);
  CHECK_THROWS_AS(split_dataset(std::vector<PatientRecord>(9), 1), DataError);
}

TEST_CASE("interval examples") {
  auto iv = derive_intervals(std::vector<Visit>{visit_at(0, {}), visit_at(3, {}), visit_at(10, {})});
  CHECK(iv.delta_prev_days == std::vector<double>{0, 3, 7});
  CHECK(iv.delta_global_days == std::vector<double>{0, 3, 10});

  auto two = derive_intervals(std::vector<Visit>{visit_at(5, {}), visit_at(5.5, {})});
  CHECK(two.delta_prev_days == std::vector<double>{0, 0.5});
}

TEST_CASE("intervals ignore a constant time shift") {
  auto config = default_gen_config();
  config.n_patients = 30;
  for (const auto& r : generate(config, 2).patients) {
    auto shifted = r.visits;
    for (auto& v : shifted) v.time_days += 1024.0;
    const auto a = derive_intervals(r.visits);
    const auto b = derive_intervals(shifted);
    REQUIRE(a.delta_prev_days.size() == b.delta_prev_days.size());
    for (std::size_t i = 0; i < a.delta_prev_days.size(); ++i) {
      CHECK(a.delta_prev_days[i] == doctest::Approx(b.delta_prev_days[i]).epsilon(1e-9));
      CHECK(a.delta_global_days[i] == doctest::Approx(b.delta_global_days[i]).epsilon(1e-9));
    }
    CHECK(a.delta_global_days.back() == doctest::Approx(r.visits.back().time_days - r.visits.front().time_days));
    CHECK(a.delta_prev_days.front() == 0.0);
  }
}

TEST_CASE("task instances for code and mortality tasks") {
  const auto vocab = small_vocab();
  const auto r = three_visit_record();
  const auto med = extract_task_instance(r, {TaskTarget::Med, AttentionMode::TaskAware}, vocab);
  CHECK(med.inputs.size() == 2);
  CHECK(med.inputs[1] == r.visits[1]);
  CHECK(med.target == std::vector<double>{0, 0, 0, 1});
  CHECK(med.intervals.delta_prev_days == std::vector<double>{0, 3});
  CHECK(med.demographics == std::array<double, 3>{0.7, 0.0, 1.0});

  const auto diag = extract_task_instance(r, {TaskTarget::Diag, AttentionMode::TaskUnaware}, vocab);
  CHECK(diag.target == std::vector<double>{1, 0, 1});

  const auto mort = extract_task_instance(r, {TaskTarget::Mortality, AttentionMode::TaskUnaware}, vocab);
  CHECK(mort.inputs.size() == 3);
  CHECK(mort.target == std::vector<double>{1});

  VocabSpec wide;
  wide.sizes = {346, 1, 1, 1};
  TaskSpec task{TaskTarget::Med, AttentionMode::TaskAware};
  CHECK(task.output_width(wide) == 346);
}

TEST_CASE("mortality forbids task-aware attention") {
  TaskSpec t{TaskTarget::Mortality, AttentionMode::TaskAware};
  CHECK_THROWS_WITH_AS(t.validate(), "mode forbidden for task", ConfigError);
  CHECK_NOTHROW(TaskSpec{TaskTarget::Mortality, AttentionMode::TaskUnaware}.validate());
}

TEST_CASE("keys parse back") {
  for (auto t : kEventTypes) CHECK(parse_event_type(event_key(t)) == t);
  CHECK(parse_task("mortality") == TaskTarget::Mortality);
  CHECK(parse_mode("task-unaware") == AttentionMode::TaskUnaware);
  CHECK_FALSE(parse_task("vitals").has_value());
}
