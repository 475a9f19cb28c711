// SPDX-License-Identifier: Apache-2.0
#include "catnet_cli/run_config.hpp"

#include <fstream>
#include <sstream>

#include "catnet/error.hpp"
#include "json.hpp"

namespace catnet::cli {

using ojson = nlohmann::ordered_json;

namespace {

TaskTarget task_or_throw(const std::string& key) {
  if (auto t = parse_task(key)) return *t;
  throw ConfigError("unknown task '" + key + "' (med, diag, lab, proc, mortality)");
}

AttentionMode mode_or_throw(const std::string& key) {
  if (auto m = parse_mode(key)) return *m;
  throw ConfigError("unknown mode '" + key + "' (task-aware, task-unaware)");
}

CellKind backbone_or_throw(const std::string& key) {
  if (auto c = parse_cell(key)) return *c;
  throw ConfigError("unsupported backbone '" + key + "' (gru, lstm)");
}

template <typename T>
void read(const ojson& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_path(const ojson& j, const char* key, std::filesystem::path& out) {
  if (j.contains(key)) out = j.at(key).get<std::string>();
}

}  // namespace

RunConfig RunConfig::from_json(std::string_view text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const ojson::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig c;
  try {
    if (j.contains("task")) c.task.target = task_or_throw(j.at("task").get<std::string>());
    if (j.contains("mode")) c.task.mode = mode_or_throw(j.at("mode").get<std::string>());
    if (j.contains("backbone")) c.backbone = backbone_or_throw(j.at("backbone").get<std::string>());
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      read_path(p, "data", c.data);
      read_path(p, "vocab", c.vocab);
      read_path(p, "model", c.model);
      read_path(p, "output_dir", c.output_dir);
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      read(m, "embed_dim", c.embed_dim);
      read(m, "time_hidden", c.time_hidden);
      read(m, "hidden", c.hidden);
      read(m, "demo_dim", c.demo_dim);
      read(m, "time_scale", c.time_scale);
      read(m, "dropout", c.dropout);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      read(t, "epochs", c.train.epochs);
      read(t, "lr", c.train.lr);
      read(t, "batch_size", c.train.batch_size);
      read(t, "beta1", c.train.beta1);
      read(t, "beta2", c.train.beta2);
      read(t, "eps", c.train.eps);
    }
    read(j, "seeds", c.seeds);
    read(j, "drops", c.drops);
  } catch (const ojson::exception& e) {
    throw ConfigError(std::string("invalid run config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string RunConfig::to_json() const {
  ojson j;
  j["task"] = task_key(task.target);
  j["mode"] = mode_key(task.mode);
  j["backbone"] = cell_key(backbone);
  j["paths"] = {{"data", data.string()},
                {"vocab", vocab.string()},
                {"model", model.string()},
                {"output_dir", output_dir.string()}};
  j["model"] = {{"embed_dim", embed_dim}, {"time_hidden", time_hidden}, {"hidden", hidden},
                {"demo_dim", demo_dim},   {"time_scale", time_scale},   {"dropout", dropout}};
  j["train"] = {{"epochs", train.epochs}, {"lr", train.lr},       {"batch_size", train.batch_size},
                {"beta1", train.beta1},   {"beta2", train.beta2}, {"eps", train.eps}};
  j["seeds"] = seeds;
  j["drops"] = drops;
  return j.dump(2);
}

std::string RunConfig::hash() const {
  auto j = ojson::parse(to_json());
  j.erase("paths");
  return fnv1a_hex(j.dump());
}

ModelConfig RunConfig::model_config(const VocabSpec& vocab) const {
  ModelConfig m;
  m.vocab = vocab;
  m.task = task;
  m.cell = backbone;
  m.embed_dim = embed_dim;
  m.time_hidden = time_hidden;
  m.hidden = hidden;
  m.demo_dim = demo_dim;
  m.time_scale = time_scale;
  m.dropout = dropout;
  return m;
}

void RunConfig::validate() const {
  task.validate();
  train.validate();
  if (seeds.empty()) throw ConfigError("seed list is empty");
}

}  // namespace catnet::cli
