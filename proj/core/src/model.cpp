// SPDX-License-Identifier: Apache-2.0
#include "catnet/model.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "catnet/error.hpp"
#include "json.hpp"

namespace catnet {

using ojson = nlohmann::ordered_json;

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

AttentionSettings ModelConfig::attention_settings() const {
  AttentionSettings s;
  s.mode = task.mode;
  if (!task.is_mortality()) s.primary = task.target_type();
  s.cross_enabled = !ablation.no_cross;
  return s;
}

std::size_t ModelConfig::visit_width() const { return visit_slot_count(vocab, attention_settings()) * embed_dim; }

void ModelConfig::validate() const {
  vocab.validate();
  task.validate();
  if (!task.is_mortality() && vocab.size(task.target_type()) == 0)
    throw ConfigError("target event type has an empty vocabulary");
  if (embed_dim == 0 || time_hidden == 0 || hidden == 0 || demo_dim == 0)
    throw ConfigError("model widths must be positive");
  if (!(time_scale > 0.0)) throw ConfigError("time_scale must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

namespace {

ojson vocab_json(const VocabSpec& v) { return ojson::parse(vocab_to_json(v)); }

}  // namespace

std::string ModelConfig::to_json() const {
  ojson j;
  j["vocab"] = vocab_json(vocab);
  j["task"] = std::string(task_key(task.target));
  j["mode"] = std::string(mode_key(task.mode));
  j["backbone"] = std::string(cell_key(cell));
  j["embed_dim"] = embed_dim;
  j["time_hidden"] = time_hidden;
  j["hidden"] = hidden;
  j["demo_dim"] = demo_dim;
  j["time_scale"] = time_scale;
  j["dropout"] = dropout;
  j["ablation"] = {{"cross_attention", ablation.no_cross},
                   {"visit_attention", ablation.no_visit_attention},
                   {"global_gate", ablation.no_global_gate},
                   {"time", ablation.no_time}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(std::string_view text) {
  try {
    const auto j = ojson::parse(text);
    ModelConfig c;
    c.vocab = vocab_from_json(j.at("vocab").dump());
    const auto task = parse_task(j.at("task").get<std::string>());
    const auto mode = parse_mode(j.at("mode").get<std::string>());
    const auto cell = parse_cell(j.at("backbone").get<std::string>());
    if (!task || !mode || !cell) throw ConfigError("model config: unknown task, mode or backbone");
    c.task = {*task, *mode};
    c.cell = *cell;
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.time_hidden = j.at("time_hidden").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.demo_dim = j.at("demo_dim").get<std::size_t>();
    c.time_scale = j.at("time_scale").get<double>();
    c.dropout = j.at("dropout").get<double>();
    const auto& a = j.at("ablation");
    c.ablation.no_cross = a.value("cross_attention", false);
    c.ablation.no_visit_attention = a.value("visit_attention", false);
    c.ablation.no_global_gate = a.value("global_gate", false);
    c.ablation.no_time = a.value("time", false);
    c.validate();
    return c;
  } catch (const ojson::exception& e) {
    throw ConfigError(std::string("invalid model config: ") + e.what());
  }
}

CatNetModel::CatNetModel(ModelConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  config_.validate();
  config_hash_ = fnv1a_hex(config_.to_json());
  seed_ = init_seed;
  Rng rng = Rng::substream(init_seed, 0x1417);
  embeddings_ = make_code_embeddings(config_.vocab, config_.embed_dim, rng);
  local_kernel_ = make_time_kernel("time_local", config_.time_hidden, config_.embed_dim, rng);
  Tensor constant({1, config_.embed_dim});
  for (auto& v : constant.storage()) v = 0.3 * rng.normal();
  time_constant_ = Parameter("time_constant", std::move(constant));
  rnn_ = make_recurrent(config_.cell, config_.visit_width(), config_.hidden, rng);
  head_ = make_head(config_.hidden, kDemographicWidth, config_.demo_dim, config_.task.output_width(config_.vocab), rng);
}

std::vector<Parameter*> CatNetModel::parameters() {
  std::vector<Parameter*> out;
  for (auto& t : embeddings_.tables)
    if (t) out.push_back(&*t);
  if (config_.ablation.no_time) {
    out.push_back(&time_constant_);
  } else {
    for (auto* p : {&local_kernel_.w1, &local_kernel_.b1, &local_kernel_.w2, &local_kernel_.b2}) out.push_back(p);
  }
  out.push_back(&rnn_.w_x);
  out.push_back(&rnn_.w_h);
  if (rnn_.kind == CellKind::Gru) out.push_back(&rnn_.w_hc);
  out.push_back(&rnn_.bias);
  for (auto* p : {&head_.global_kernel.w1, &head_.global_kernel.b1, &head_.global_kernel.w2, &head_.global_kernel.b2,
                  &head_.demo_w, &head_.demo_b, &head_.out_w, &head_.out_b})
    out.push_back(p);
  return out;
}

std::vector<const Parameter*> CatNetModel::parameters() const {
  auto mut = const_cast<CatNetModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

Parameter& CatNetModel::parameter(std::string_view name) {
  for (auto* p : parameters())
    if (p->name == name) return *p;
  throw Error("unknown parameter '" + std::string(name) + "'");
}

std::size_t CatNetModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->value.size();
  return n;
}

void CatNetModel::zero_grad() {
  for (auto* p : parameters()) p->grad = Tensor(p->value.shape());
}

ForwardResult CatNetModel::forward(Tape& tape, std::span<const TaskInstance> batch, const ForwardOptions& options) {
  if (batch.empty()) throw ShapeError("forward: empty batch");
  const auto settings = config_.attention_settings();
  const bool use_dropout = options.training && config_.dropout > 0.0;
  if (use_dropout && !options.dropout_rng) throw ConfigError("forward: training with dropout needs an RNG");

  const auto emb = bind(tape, embeddings_);
  TimeKernelVars local{};
  Var constant;
  if (config_.ablation.no_time)
    constant = tape.param(time_constant_);
  else
    local = bind(tape, local_kernel_);
  const auto rnn = bind(tape, rnn_);
  const auto head = bind(tape, head_);

  Var intervals;
  std::vector<std::size_t> offsets;
  if (!config_.ablation.no_time) {
    std::vector<double> deltas;
    for (const auto& inst : batch) {
      offsets.push_back(deltas.size());
      if (inst.intervals.delta_prev_days.size() != inst.inputs.size())
        throw DataError("forward: interval view does not match visits");
      deltas.insert(deltas.end(), inst.intervals.delta_prev_days.begin(), inst.intervals.delta_prev_days.end());
    }
    intervals = time_embed(tape, local, deltas, config_.time_scale);
  }

  ForwardResult result;
  const std::size_t width = config_.visit_width();
  const double keep_prob = 1.0 - config_.dropout;
  std::vector<std::vector<Var>> visit_vectors(batch.size());
  std::vector<std::size_t> lengths(batch.size());
  std::size_t max_len = 0;
  for (std::size_t p = 0; p < batch.size(); ++p) {
    const auto& inst = batch[p];
    if (inst.inputs.empty()) throw DataError("forward: instance without input visits");
    lengths[p] = inst.inputs.size();
    max_len = std::max(max_len, lengths[p]);
    for (std::size_t t = 0; t < inst.inputs.size(); ++t) {
      const Var interval = config_.ablation.no_time ? constant : tape.gather_rows(intervals, {offsets[p] + t});
      auto tokens = build_tokens(inst.inputs[t]);
      auto att = attend(tape, emb, interval, tokens, config_.vocab, settings);
      Var o = att.visit_vector;
      if (use_dropout) {
        Tensor mask({1, width});
        for (auto& m : mask.storage()) m = options.dropout_rng->bernoulli(keep_prob) ? 1.0 / keep_prob : 0.0;
        o = tape.mul(o, tape.constant(std::move(mask)));
      }
      visit_vectors[p].push_back(o);
      if (options.keep_attention && att.weights.valid())
        result.attention.push_back({p, t, std::move(tokens), std::move(att.queries), tape.value(att.weights)});
    }
  }

  const Var zero_row = tape.constant(Tensor({1, width}));
  std::vector<Var> steps;
  for (std::size_t t = 0; t < max_len; ++t) {
    std::vector<Var> rows;
    for (std::size_t p = 0; p < batch.size(); ++p) rows.push_back(t < lengths[p] ? visit_vectors[p][t] : zero_row);
    steps.push_back(rows.size() == 1 ? rows[0] : tape.concat_rows(rows));
  }
  const auto outputs = run_sequence(tape, rnn, steps, lengths);

  std::vector<Var> probs;
  for (std::size_t p = 0; p < batch.size(); ++p) {
    std::vector<Var> rows;
    for (std::size_t t = 0; t < lengths[p]; ++t)
      rows.push_back(batch.size() == 1 ? outputs[t] : tape.gather_rows(outputs[t], {p}));
    const Var hidden = rows.size() == 1 ? rows[0] : tape.concat_rows(rows);
    const Var contexts = config_.ablation.no_visit_attention ? hidden : visit_self_attention(tape, hidden).contexts;
    Var gated;
    if (!config_.ablation.no_global_gate)
      gated = global_time_gate(tape, head.global_kernel, hidden, batch[p].intervals.delta_global_days,
                               config_.time_scale)
                  .gated;
    probs.push_back(fuse_and_predict(tape, contexts, gated, batch[p].demographics, head));
  }
  result.probs = probs.size() == 1 ? probs[0] : tape.concat_rows(probs);
  return result;
}

std::vector<std::vector<double>> CatNetModel::predict(std::span<const TaskInstance> instances, std::size_t batch_size) {
  std::vector<std::vector<double>> out;
  out.reserve(instances.size());
  batch_size = std::max<std::size_t>(1, batch_size);
  for (std::size_t begin = 0; begin < instances.size(); begin += batch_size) {
    const auto chunk = instances.subspan(begin, std::min(batch_size, instances.size() - begin));
    Tape tape;
    const auto fwd = forward(tape, chunk);
    const auto& probs = tape.value(fwd.probs);
    const std::size_t cols = probs.cols();
    for (std::size_t r = 0; r < chunk.size(); ++r)
      out.emplace_back(probs.storage().begin() + static_cast<std::ptrdiff_t>(r * cols),
                       probs.storage().begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
  }
  return out;
}

std::string CatNetModel::to_json() const {
  ojson j;
  j["format_version"] = kFormatVersion;
  j["config_hash"] = config_hash_;
  j["seed"] = seed_;
  j["model_config"] = ojson::parse(config_.to_json());
  ojson params = ojson::object();
  for (const auto* p : parameters()) params[p->name] = {{"shape", p->value.shape()}, {"values", p->value.storage()}};
  j["params"] = std::move(params);
  return j.dump();
}

CatNetModel CatNetModel::from_json(std::string_view text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const ojson::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kFormatVersion) throw DataError("unsupported model format_version");
    CatNetModel model(ModelConfig::from_json(j.at("model_config").dump()), 0);
    model.config_hash_ = j.at("config_hash").get<std::string>();
    model.seed_ = j.at("seed").get<std::uint64_t>();
    const auto& params = j.at("params");
    for (auto* p : model.parameters()) {
      if (!params.contains(p->name)) throw DataError("model file lacks parameter '" + p->name + "'");
      const auto& entry = params.at(p->name);
      const auto shape = entry.at("shape").get<Shape>();
      if (shape != p->value.shape())
        throw DataError("parameter '" + p->name + "' has shape " + to_string(shape) + ", expected " +
                        to_string(p->value.shape()));
      p->value = Tensor(shape, entry.at("values").get<std::vector<double>>());
      p->grad = Tensor(shape);
    }
    if (params.size() != model.parameters().size()) throw DataError("model file has unexpected parameters");
    return model;
  } catch (const ojson::exception& e) {
    throw DataError(std::string("invalid model file: ") + e.what());
  }
}

void CatNetModel::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json() << '\n';
}

CatNetModel CatNetModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace catnet
