// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "catnet/model.hpp"
#include "catnet/synth.hpp"
#include "catnet_cli/commands.hpp"
#include "doctest.h"

using namespace catnet;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("catnet_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

// A small cohort and a quickly trained model shared by several cases.
struct Workspace {
  TempDir dir{"shared"};
  std::string data, model;
  Workspace() {
    auto cfg = default_gen_config();
    cfg.n_patients = 120;
    cfg.max_visits = 8;
    write(dir / "gen.json", gen_config_to_json(cfg));
    REQUIRE(invoke({"gen", "--config", dir / "gen.json", "--out", dir / "data", "--seed", "4"}).code == 0);
    data = dir / "data/cohort.jsonl";
    const auto r = invoke({"train", "--data", data, "--out", dir / "run", "--epochs", "12", "--lr", "3e-3", "--hidden",
                        "16", "--seed", "2", "--quiet"});
    REQUIRE(r.code == 0);
    model = dir / "run/model.json";
  }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("gen writes one line per patient and is repeatable") {
  TempDir dir("gen");
  auto cfg = default_gen_config();
  cfg.n_patients = 37;
  write(dir / "gen.json", gen_config_to_json(cfg));
  const auto a = invoke({"gen", "--config", dir / "gen.json", "--out", dir / "a", "--seed", "5"});
  const auto b = invoke({"gen", "--config", dir / "gen.json", "--out", dir / "b", "--seed", "5"});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(lines(slurp(dir / "a/cohort.jsonl")).size() == 37);
  CHECK(slurp(dir / "a/cohort.jsonl") == slurp(dir / "b/cohort.jsonl"));
  CHECK(slurp(dir / "a/vocab.json") == slurp(dir / "b/vocab.json"));
  CHECK(a.out.find("planted rules") != std::string::npos);
  CHECK(invoke({"gen", "--config", dir / "gen.json", "--out", dir / "c", "--seed", "6"}).code == 0);
  CHECK(slurp(dir / "a/cohort.jsonl") != slurp(dir / "c/cohort.jsonl"));
}

TEST_CASE("gen reports a missing config as a usage error") {
  TempDir dir("gen_missing");
  const auto r = invoke({"gen", "--config", dir / "nope.json", "--out", dir / "x"});
  CHECK(r.code == 2);
  CHECK(r.err.find("nope.json") != std::string::npos);
  CHECK(invoke({"gen"}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
}

TEST_CASE("trained model beats chance on its training split") {
  auto& w = workspace();
  TempDir dir("eval_train");
  const auto r = invoke({"eval", "--model", w.model, "--data", w.data, "--split", "train", "--metrics-out", dir / "m.csv"});
  REQUIRE(r.code == 0);
  const auto rows = lines(slurp(dir / "m.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == "variant,seed,auc,aupr,recall@10,recall@20,recall@30,recall@40,recall@50");
  const auto f = fields(rows[1]);
  CHECK(f[0] == "eval:train");
  CHECK(f[1] == "2");
  CHECK(std::stod(f[2]) > 0.5);
  CHECK(fs::exists(dir / "m.json"));
  CHECK(lines(slurp(fs::path(w.model).parent_path() / "train_log.jsonl")).size() == 12);
}

TEST_CASE("model files round trip byte for byte") {
  auto& w = workspace();
  TempDir dir("resave");
  CatNetModel::load(w.model).save(dir / "again.json");
  CHECK(slurp(w.model) == slurp(dir / "again.json"));
}

TEST_CASE("training is repeatable") {
  auto& w = workspace();
  TempDir dir("retrain");
  const auto r = invoke({"train", "--data", w.data, "--out", dir / "run", "--epochs", "12", "--lr", "3e-3", "--hidden",
                      "16", "--seed", "2", "--quiet"});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "run/model.json") == slurp(w.model));
}

TEST_CASE("backbone and mode validation") {
  auto& w = workspace();
  TempDir dir("backbone");
  CHECK(invoke({"train", "--data", w.data, "--out", dir / "t", "--backbone", "transformer"}).code == 2);
  CHECK(invoke({"train", "--data", w.data, "--out", dir / "l", "--backbone", "lstm", "--epochs", "1", "--hidden", "8",
             "--quiet"})
            .code == 0);
  CHECK(CatNetModel::load(dir / "l/model.json").config().cell == CellKind::Lstm);
  const auto r = invoke({"train", "--data", w.data, "--out", dir / "m", "--task", "mortality", "--mode", "task-aware"});
  CHECK(r.code == 2);
  CHECK(r.err.find("mode forbidden for task") != std::string::npos);
  CHECK(invoke({"train", "--data", dir / "none.jsonl", "--out", dir / "n"}).code == 2);
}

TEST_CASE("eval reports a missing model as a usage error") {
  auto& w = workspace();
  TempDir dir("eval_missing");
  CHECK(invoke({"eval", "--model", dir / "nope.json", "--data", w.data}).code == 2);
  CHECK(invoke({"eval", "--model", w.model, "--data", w.data, "--split", "holdout"}).code == 2);
}

TEST_CASE("a perfect stub model scores an AUC of one") {
  TempDir dir("stub");
  auto cfg = default_gen_config();
  cfg.n_patients = 60;
  auto cohort = generate(cfg, 1);
  for (auto& p : cohort.patients) p.mortality = p.demographics.sex == Sex::Male;
  save_dataset(cohort, dir / "cohort.jsonl", dir / "vocab.json");

  ModelConfig mc;
  mc.vocab = cohort.vocab;
  mc.task = {TaskTarget::Mortality, AttentionMode::TaskUnaware};
  mc.embed_dim = 2;
  mc.time_hidden = 2;
  mc.hidden = 2;
  mc.demo_dim = 1;
  CatNetModel model(mc, 1);
  for (auto* p : model.parameters())
    for (auto& v : p->value.storage()) v = 0.0;
  // e_S = is_male; y = sigmoid(10 * e_S - 5).
  model.parameter("demo.w").value.at(0, 2) = 1.0;
  model.parameter("out.w").value.at(0, 2) = 10.0;
  model.parameter("out.b").value[0] = -5.0;
  model.save(dir / "stub.json");

  const auto r = invoke({"eval", "--model", dir / "stub.json", "--data", dir / "cohort.jsonl", "--split", "train",
                      "--metrics-out", dir / "m.csv"});
  REQUIRE(r.code == 0);
  const auto f = fields(lines(slurp(dir / "m.csv"))[1]);
  CHECK(std::stod(f[2]) == 1.0);
  CHECK(std::stod(f[3]) == 1.0);
}

TEST_CASE("ablate writes one row per variant and seed") {
  auto& w = workspace();
  TempDir dir("ablate");
  const auto r = invoke({"ablate", "--data", w.data, "--out", dir / "a", "--drop", "cross_attention,time", "--seeds",
                      "1,2", "--epochs", "1", "--hidden", "8"});
  REQUIRE(r.code == 0);
  const auto rows = lines(slurp(dir / "a/ablation.csv"));
  CHECK(rows.size() == 1 + 3 * 2);
  CHECK(fields(rows[1])[0] == "full");
  CHECK(fs::exists(dir / "a/summary.json"));
  CHECK(lines(slurp(dir / "a/training_log.jsonl")).size() == 3 * 2);
  CHECK(r.out.find("w/o_time") != std::string::npos);

  const auto bad = invoke({"ablate", "--data", w.data, "--out", dir / "b", "--drop", "gravity"});
  CHECK(bad.code == 2);
}

TEST_CASE("export-attention keeps at most top keys per query") {
  auto& w = workspace();
  TempDir dir("export");
  const auto r = invoke({"export-attention", "--model", w.model, "--data", w.data, "--query-type", "med", "--key-type",
                      "diag", "--top", "3", "--out", dir / "att.csv"});
  REQUIRE(r.code == 0);
  const auto rows = lines(slurp(dir / "att.csv"));
  REQUIRE(rows.size() > 1);
  CHECK(rows[0] == "query_type,query_code,key_type,key_code,weight");
  std::map<std::string, int> count;
  std::map<std::string, double> total;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = fields(rows[i]);
    CHECK(f[0] == "med");
    CHECK(f[2] == "diag");
    ++count[f[1]];
    total[f[1]] += std::stod(f[4]);
  }
  for (const auto& [q, n] : count) CHECK(n <= 3);
  for (const auto& [q, s] : total) CHECK(s <= 1.0 + 1e-9);

  const auto empty = invoke({"export-attention", "--model", w.model, "--data", w.data, "--query-type", "diag",
                          "--key-type", "med", "--out", dir / "empty.csv"});
  REQUIRE(empty.code == 0);
  CHECK(slurp(dir / "empty.csv") == "query_type,query_code,key_type,key_code,weight\n");
  CHECK(invoke({"export-attention", "--model", w.model, "--data", w.data, "--query-type", "gene", "--out",
             dir / "x.csv"})
            .code == 2);
}
