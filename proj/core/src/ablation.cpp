// SPDX-License-Identifier: Apache-2.0
#include "catnet/ablation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "catnet/error.hpp"
#include "json.hpp"

namespace catnet {

namespace {

constexpr std::array<std::pair<Drop, std::string_view>, 8> kDropKeys = {{
    {Drop::CrossAttention, "cross_attention"},
    {Drop::VisitAttention, "visit_attention"},
    {Drop::GlobalGate, "global_gate"},
    {Drop::Diag, "diag"},
    {Drop::Lab, "lab"},
    {Drop::Proc, "proc"},
    {Drop::Time, "time"},
    {Drop::AllAuxiliary, "all-auxiliary"},
}};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string_view drop_key(Drop d) noexcept {
  for (const auto& [drop, key] : kDropKeys)
    if (drop == d) return key;
  return "unknown";
}

std::optional<Drop> parse_drop(std::string_view key) noexcept {
  for (const auto& [drop, k] : kDropKeys)
    if (k == key) return drop;
  return std::nullopt;
}

AblationSpec AblationSpec::parse(const std::vector<std::string>& names) {
  AblationSpec spec;
  for (const auto& name : names) {
    const auto d = parse_drop(name);
    if (!d) throw ConfigError("unknown ablation drop '" + name + "'");
    if (std::find(spec.drops.begin(), spec.drops.end(), *d) != spec.drops.end())
      throw ConfigError("ablation drop '" + name + "' listed twice");
    spec.drops.push_back(*d);
  }
  return spec;
}

std::string variant_name(std::optional<Drop> drop) {
  return drop ? "w/o_" + std::string(drop_key(*drop)) : std::string("full");
}

ModelConfig apply_drop(ModelConfig config, Drop drop) {
  switch (drop) {
    case Drop::CrossAttention: config.ablation.no_cross = true; break;
    case Drop::VisitAttention: config.ablation.no_visit_attention = true; break;
    case Drop::GlobalGate: config.ablation.no_global_gate = true; break;
    case Drop::Time: config.ablation.no_time = true; break;
    default: break;
  }
  return config;
}

std::vector<PatientRecord> strip_event_types(const std::vector<PatientRecord>& records, Drop drop,
                                             const TaskSpec& task) {
  std::vector<EventType> removed;
  switch (drop) {
    case Drop::Diag: removed = {EventType::Diag}; break;
    case Drop::Lab: removed = {EventType::Lab}; break;
    case Drop::Proc: removed = {EventType::Proc}; break;
    case Drop::AllAuxiliary:
      if (task.is_mortality()) throw ConfigError("all-auxiliary drop needs a code task");
      for (auto t : kEventTypes)
        if (t != task.target_type()) removed.push_back(t);
      break;
    default: return records;
  }
  if (!task.is_mortality())
    for (auto t : removed)
      if (t == task.target_type())
        throw ConfigError("cannot drop '" + std::string(event_key(t)) + "' events for the " +
                          std::string(task_key(task.target)) + " task");
  std::vector<PatientRecord> out = records;
  for (auto& r : out)
    for (auto& v : r.visits)
      for (auto t : removed) v.codes[index_of(t)].clear();
  return out;
}

std::size_t threads_from_env() {
  const char* env = std::getenv("CATNET_THREADS");
  if (!env) return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n < 1) return 1;
  return static_cast<std::size_t>(n);
}

AblationReport run_ablation(const ModelConfig& base, const TrainConfig& train, const AblationSpec& spec,
                            const std::vector<PatientRecord>& records, const std::vector<std::uint64_t>& seeds,
                            const AblationOptions& options) {
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  base.validate();
  train.validate();

  std::vector<std::optional<Drop>> variants{std::nullopt};
  for (auto d : spec.drops) variants.emplace_back(d);

  // Resolve every variant up front so configuration errors surface before training.
  std::vector<ModelConfig> configs;
  std::vector<std::vector<PatientRecord>> cohorts;
  for (const auto& v : variants) {
    configs.push_back(v ? apply_drop(base, *v) : base);
    configs.back().validate();
    cohorts.push_back(v ? strip_event_types(records, *v, base.task) : records);
  }

  AblationReport report;
  report.config_hash = fnv1a_hex(base.to_json());
  report.seeds = seeds;
  report.rows.resize(variants.size());
  for (std::size_t v = 0; v < variants.size(); ++v) {
    report.rows[v].variant = variant_name(variants[v]);
    report.rows[v].runs.resize(seeds.size());
  }

  const std::size_t jobs = variants.size() * seeds.size();
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      const std::size_t v = job / seeds.size();
      const std::size_t s = job % seeds.size();
      try {
        const auto split = split_dataset(cohorts[v], seeds[s]);
        const auto& cfg = configs[v];
        const auto train_set = extract_task_instances(split.train, cfg.task, cfg.vocab);
        const auto val_set = extract_task_instances(split.val, cfg.task, cfg.vocab);
        const auto test_set = extract_task_instances(split.test, cfg.task, cfg.vocab);
        TrainConfig tc = train;
        tc.seed = seeds[s];
        auto fitted = fit(train_set, val_set, cfg, tc);
        SeedRun& run = report.rows[v].runs[s];
        run.seed = seeds[s];
        run.metrics = evaluate(fitted.model, test_set);
        run.log = std::move(fitted.log);
        run.best_epoch = fitted.best_epoch;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = jobs;
      }
    }
  };

  const std::size_t threads = std::min(jobs, options.threads ? options.threads : threads_from_env());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (auto& row : report.rows) {
    std::vector<EvalMetrics> ms;
    for (const auto& r : row.runs) ms.push_back(r.metrics);
    row.summary = summarize(ms);
  }
  return report;
}

std::string metrics_csv_row(const std::string& variant, std::uint64_t seed, const EvalMetrics& m) {
  std::string line = variant + "," + std::to_string(seed) + "," + fmt(m.auc) + "," + fmt(m.aupr);
  for (double r : m.recall) line += "," + fmt(r);
  return line;
}

std::string metrics_csv(const AblationReport& report) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const auto& row : report.rows)
    for (const auto& run : row.runs) out += metrics_csv_row(row.variant, run.seed, run.metrics) + '\n';
  return out;
}

std::string summary_json(const AblationReport& report) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["config_hash"] = report.config_hash;
  j["seeds"] = report.seeds;
  ordered_json variants = ordered_json::array();
  for (const auto& row : report.rows) {
    auto stat = [&](const MeanStd& ms, auto pick) {
      ordered_json values = ordered_json::array();
      for (const auto& run : row.runs) values.push_back(pick(run.metrics));
      return ordered_json{{"mean", ms.mean}, {"std", ms.std}, {"values", values}};
    };
    ordered_json v;
    v["variant"] = row.variant;
    v["auc"] = stat(row.summary.auc, [](const EvalMetrics& m) { return m.auc; });
    v["aupr"] = stat(row.summary.aupr, [](const EvalMetrics& m) { return m.aupr; });
    for (std::size_t i = 0; i < kRecallKs.size(); ++i)
      v["recall@" + std::to_string(kRecallKs[i])] =
          stat(row.summary.recall[i], [i](const EvalMetrics& m) { return m.recall[i]; });
    variants.push_back(std::move(v));
  }
  j["variants"] = std::move(variants);
  return j.dump(2) + "\n";
}

std::string training_log_jsonl(const AblationReport& report) {
  std::string out;
  for (const auto& row : report.rows) {
    for (const auto& run : row.runs) {
      for (const auto& e : run.log) {
        auto j = nlohmann::ordered_json::parse(epoch_log_json(e));
        nlohmann::ordered_json tagged;
        tagged["variant"] = row.variant;
        tagged["seed"] = run.seed;
        for (auto it = j.begin(); it != j.end(); ++it) tagged[it.key()] = it.value();
        out += tagged.dump() + '\n';
      }
    }
  }
  return out;
}

std::string summary_table(const AblationReport& report) {
  std::ostringstream os;
  os << "variant";
  for (auto h : {"auc", "aupr"}) os << '\t' << h;
  for (auto k : kRecallKs) os << "\trecall@" << k;
  os << '\n';
  auto cell = [](const MeanStd& ms) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f \u00b1 %.4f", ms.mean, ms.std);
    return std::string(buf);
  };
  for (const auto& row : report.rows) {
    os << row.variant << '\t' << cell(row.summary.auc) << '\t' << cell(row.summary.aupr);
    for (const auto& r : row.summary.recall) os << '\t' << cell(r);
    os << '\n';
  }
  return os.str();
}

}  // namespace catnet
