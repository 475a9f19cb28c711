// SPDX-License-Identifier: Apache-2.0
#include "catnet_cli/commands.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "catnet/ablation.hpp"
#include "catnet/error.hpp"
#include "catnet/synth.hpp"
#include "catnet_cli/run_config.hpp"
#include "json.hpp"

namespace catnet::cli {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

struct Overrides {
  std::string config;
  std::string data;
  std::string vocab;
  std::string out;
  std::string task;
  std::string mode;
  std::string backbone;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> hidden;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> drops;
  bool drops_given = false;
};

void add_run_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Run config JSON");
  cmd->add_option("--data", o.data, "Cohort JSONL");
  cmd->add_option("--vocab", o.vocab, "Vocabulary JSON (default: vocab.json beside the data)");
  cmd->add_option("--task", o.task, "med, diag, lab, proc or mortality");
  cmd->add_option("--mode", o.mode, "task-aware or task-unaware");
  cmd->add_option("--backbone", o.backbone, "gru or lstm");
  cmd->add_option("--epochs", o.epochs);
  cmd->add_option("--lr", o.lr);
  cmd->add_option("--batch-size", o.batch_size);
  cmd->add_option("--hidden", o.hidden, "Recurrent hidden width");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
  if (!o.data.empty()) c.data = o.data;
  if (!o.vocab.empty()) c.vocab = o.vocab;
  if (!o.out.empty()) c.output_dir = o.out;
  if (!o.task.empty()) {
    auto t = parse_task(o.task);
    if (!t) throw ConfigError("unknown task '" + o.task + "' (med, diag, lab, proc, mortality)");
    c.task.target = *t;
  }
  if (!o.mode.empty()) {
    auto m = parse_mode(o.mode);
    if (!m) throw ConfigError("unknown mode '" + o.mode + "' (task-aware, task-unaware)");
    c.task.mode = *m;
  }
  if (!o.backbone.empty()) {
    auto b = parse_cell(o.backbone);
    if (!b) throw ConfigError("unsupported backbone '" + o.backbone + "' (gru, lstm)");
    c.backbone = *b;
  }
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.lr) c.train.lr = *o.lr;
  if (o.batch_size) c.train.batch_size = *o.batch_size;
  if (o.hidden) c.hidden = *o.hidden;
  if (!o.seeds.empty()) c.seeds = o.seeds;
  if (o.seed) c.seeds = {*o.seed};
  if (o.drops_given) c.drops = o.drops;
  c.validate();
  if (c.data.empty()) throw ConfigError("no dataset given (--data or paths.data)");
  return c;
}

Cohort load_cohort(const fs::path& data, const fs::path& vocab) {
  if (!fs::exists(data)) throw ConfigError("dataset not found: " + data.string());
  return load_dataset(data, vocab);
}

const std::vector<PatientRecord>& pick_split(const DatasetSplit& split, const std::string& name) {
  if (name == "train") return split.train;
  if (name == "val") return split.val;
  if (name == "test") return split.test;
  throw ConfigError("unknown split '" + name + "' (train, val, test)");
}

int cmd_gen(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
            std::ostream& out) {
  GenConfig config = config_path.empty() ? default_gen_config() : gen_config_from_json(read_file(config_path));
  if (seed) config.seed = *seed;
  config.validate();
  const Cohort cohort = generate(config, config.seed);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  save_dataset(cohort, dir / "cohort.jsonl", dir / "vocab.json");
  out << describe(config);
  out << "wrote " << cohort.patients.size() << " patients to " << (dir / "cohort.jsonl").string() << "\n";
  return kExitOk;
}

int cmd_train(const Overrides& o, bool quiet, std::ostream& out) {
  const RunConfig rc = resolve(o);
  if (rc.output_dir.empty()) throw ConfigError("no output directory given (--out or paths.output_dir)");
  const Cohort cohort = load_cohort(rc.data, rc.vocab);
  const std::uint64_t seed = rc.seeds.front();
  const auto split = split_dataset(cohort.patients, seed);
  const ModelConfig mc = rc.model_config(cohort.vocab);
  const auto train = extract_task_instances(split.train, mc.task, mc.vocab);
  const auto val = extract_task_instances(split.val, mc.task, mc.vocab);
  TrainConfig tc = rc.train;
  tc.seed = seed;

  std::string log;
  auto fitted = fit(train, val, mc, tc, [&](const EpochLog& e) {
    log += epoch_log_json(e) + "\n";
    if (!quiet) out << epoch_log_json(e) << "\n";
  });
  fitted.model.set_config_hash(rc.hash());
  fitted.model.set_seed(seed);
  const fs::path model_path = rc.output_dir / "model.json";
  fitted.model.save(model_path);
  write_file(rc.output_dir / "train_log.jsonl", log);
  write_file(rc.output_dir / "run_config.json", rc.to_json() + "\n");
  const auto& best = fitted.log.at(fitted.best_epoch - 1);
  out << "best epoch " << fitted.best_epoch << " val_auc "
      << (best.val_auc ? std::to_string(*best.val_auc) : std::string("undefined")) << "\n";
  out << "wrote " << model_path.string() << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& data, const std::string& vocab,
             const std::string& split_name, const std::string& metrics_out, std::ostream& out) {
  if (!fs::exists(model_path)) throw ConfigError("model file not found: " + model_path);
  CatNetModel model = CatNetModel::load(model_path);
  const Cohort cohort = load_cohort(data, vocab);
  if (cohort.vocab.sizes != model.config().vocab.sizes)
    throw ConfigError("dataset vocabulary does not match the model's");
  const auto split = split_dataset(cohort.patients, model.seed());
  const auto& records = pick_split(split, split_name);
  const auto instances = extract_task_instances(records, model.config().task, model.config().vocab);
  const EvalMetrics m = evaluate(model, instances);

  const std::string variant = "eval:" + split_name;
  const std::string csv = std::string(kMetricsHeader) + "\n" + metrics_csv_row(variant, model.seed(), m) + "\n";
  if (!metrics_out.empty()) {
    const fs::path csv_path(metrics_out);
    write_file(csv_path, csv);
    nlohmann::ordered_json j;
    j["config_hash"] = model.config_hash();
    j["seed"] = model.seed();
    j["split"] = split_name;
    j["instances"] = instances.size();
    j["auc"] = m.auc;
    j["aupr"] = m.aupr;
    for (std::size_t i = 0; i < kRecallKs.size(); ++i) j["recall@" + std::to_string(kRecallKs[i])] = m.recall[i];
    j["recall_skipped"] = m.recall_skipped;
    fs::path json_path = csv_path;
    json_path.replace_extension(".json");
    write_file(json_path, j.dump(2) + "\n");
  }
  out << csv;
  return kExitOk;
}

int cmd_ablate(const Overrides& o, std::ostream& out) {
  const RunConfig rc = resolve(o);
  const AblationSpec spec = AblationSpec::parse(rc.drops);
  const Cohort cohort = load_cohort(rc.data, rc.vocab);
  const ModelConfig mc = rc.model_config(cohort.vocab);
  AblationReport report = run_ablation(mc, rc.train, spec, cohort.patients, rc.seeds);
  report.config_hash = rc.hash();
  if (!rc.output_dir.empty()) {
    write_file(rc.output_dir / "ablation.csv", metrics_csv(report));
    write_file(rc.output_dir / "summary.json", summary_json(report));
    write_file(rc.output_dir / "training_log.jsonl", training_log_jsonl(report));
  }
  out << summary_table(report);
  return kExitOk;
}

int cmd_export_attention(const std::string& model_path, const std::string& data, const std::string& vocab,
                         const std::string& split_name, const std::string& query_type, const std::string& key_type,
                         std::size_t top, const std::string& out_path, std::ostream& out) {
  auto valid_type = [](const std::string& t) { return t == "time" || parse_event_type(t).has_value(); };
  if (!valid_type(query_type)) throw ConfigError("unknown query type '" + query_type + "'");
  if (!valid_type(key_type)) throw ConfigError("unknown key type '" + key_type + "'");
  if (top < 1) throw ConfigError("--top must be at least 1");
  if (!fs::exists(model_path)) throw ConfigError("model file not found: " + model_path);
  CatNetModel model = CatNetModel::load(model_path);
  const Cohort cohort = load_cohort(data, vocab);
  if (cohort.vocab.sizes != model.config().vocab.sizes)
    throw ConfigError("dataset vocabulary does not match the model's");

  std::vector<PatientRecord> records;
  if (split_name == "all") {
    records = cohort.patients;
  } else {
    records = pick_split(split_dataset(cohort.patients, model.seed()), split_name);
  }
  const auto instances = extract_task_instances(records, model.config().task, model.config().vocab);

  AttentionAccumulator acc(query_type, key_type);
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < instances.size(); start += kChunk) {
    const std::size_t end = std::min(instances.size(), start + kChunk);
    Tape tape;
    ForwardOptions opts;
    opts.keep_attention = true;
    const auto res = model.forward(tape, std::span(instances.data() + start, end - start), opts);
    for (const auto& rec : res.attention)
      acc.add(export_weights(rec.weights, rec.tokens, rec.queries, model.config().vocab));
  }
  const auto entries = acc.result(top);
  write_file(out_path, attention_csv(entries));
  out << "wrote " << entries.size() << " rows to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"CATNet: time-aware cross-event attention for next-visit prediction", "catnet"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "catnet 0.1.0");

  std::string gen_config, gen_out;
  std::optional<std::uint64_t> gen_seed;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic cohort");
  gen->add_option("--config", gen_config, "Generator config JSON (default: built-in)");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Overrides the config seed");

  Overrides train_o;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "Train a model");
  add_run_options(train, train_o);
  train->add_option("--out", train_o.out, "Output directory");
  train->add_option("--seed", train_o.seed, "Run seed (split and initialization)");
  train->add_flag("--quiet", quiet, "Do not print per-epoch progress");

  std::string eval_model, eval_data, eval_vocab, eval_split = "test", eval_metrics;
  auto* eval = app.add_subcommand("eval", "Evaluate a trained model");
  eval->add_option("--model", eval_model)->required();
  eval->add_option("--data", eval_data)->required();
  eval->add_option("--vocab", eval_vocab);
  eval->add_option("--split", eval_split, "train, val or test")->capture_default_str();
  eval->add_option("--metrics-out", eval_metrics, "Metrics CSV path (a JSON copy is written beside it)");

  Overrides ablate_o;
  std::string drop_list;
  auto* ablate = app.add_subcommand("ablate", "Run the ablation matrix");
  add_run_options(ablate, ablate_o);
  ablate->add_option("--out", ablate_o.out, "Output directory");
  ablate->add_option("--drop", drop_list,
                     "Comma-separated drops: cross_attention, visit_attention, global_gate, diag, lab, proc, time, "
                     "all-auxiliary");
  ablate->add_option("--seeds", ablate_o.seeds, "Seed list")->delimiter(',');

  std::string ex_model, ex_data, ex_vocab, ex_split = "all", ex_query = "med", ex_key = "diag", ex_out;
  std::size_t ex_top = 10;
  auto* exp = app.add_subcommand("export-attention", "Export averaged cross-event attention weights");
  exp->add_option("--model", ex_model)->required();
  exp->add_option("--data", ex_data)->required();
  exp->add_option("--vocab", ex_vocab);
  exp->add_option("--split", ex_split, "all, train, val or test")->capture_default_str();
  exp->add_option("--query-type", ex_query)->capture_default_str();
  exp->add_option("--key-type", ex_key)->capture_default_str();
  exp->add_option("--top", ex_top)->capture_default_str();
  exp->add_option("--out", ex_out)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen(gen_config, gen_out, gen_seed, out);
    if (*train) return cmd_train(train_o, quiet, out);
    if (*eval) return cmd_eval(eval_model, eval_data, eval_vocab, eval_split, eval_metrics, out);
    if (*ablate) {
      if (!drop_list.empty()) {
        ablate_o.drops_given = true;
        std::stringstream ss(drop_list);
        for (std::string item; std::getline(ss, item, ',');)
          if (!item.empty()) ablate_o.drops.push_back(item);
      }
      return cmd_ablate(ablate_o, out);
    }
    if (*exp)
      return cmd_export_attention(ex_model, ex_data, ex_vocab, ex_split, ex_query, ex_key, ex_top, ex_out, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace catnet::cli
