// SPDX-License-Identifier: Apache-2.0
#include "catnet/cross_event_attention.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "catnet/error.hpp"

namespace catnet {

std::size_t CodeEmbeddings::width() const {
  for (const auto& t : tables)
    if (t) return t->value.cols();
  return 0;
}

CodeEmbeddings make_code_embeddings(const VocabSpec& vocab, std::size_t width, Rng& rng, double stddev) {
  CodeEmbeddings e;
  for (auto t : kEventTypes) {
    const auto n = vocab.size(t);
    if (n == 0) continue;
    Tensor table({n, width});
    for (auto& v : table.storage()) v = stddev * rng.normal();
    e.tables[index_of(t)] = Parameter("embed." + std::string(event_key(t)), std::move(table));
  }
  return e;
}

CodeEmbeddingVars bind(Tape& tape, CodeEmbeddings& embeddings) {
  CodeEmbeddingVars vars;
  for (std::size_t i = 0; i < kNumEventTypes; ++i)
    if (embeddings.tables[i]) vars.tables[i] = tape.param(*embeddings.tables[i]);
  return vars;
}

VisitTokenSet build_tokens(const Visit& visit) {
  VisitTokenSet set;
  set.tokens.reserve(visit.code_count() + 1);
  for (auto t : kEventTypes)
    for (auto c : visit.codes_of(t)) set.tokens.push_back({false, t, c});
  set.tokens.push_back({true, EventType::Med, 0});
  return set;
}

std::size_t visit_slot_count(const VocabSpec& vocab, const AttentionSettings& settings) {
  if (settings.mode == AttentionMode::TaskAware) return vocab.size(settings.primary) + 1;
  return vocab.total() + 1;
}

AttentionOutput attend(Tape& tape, const CodeEmbeddingVars& embeddings, Var interval_embedding,
                       const VisitTokenSet& tokens, const VocabSpec& vocab, const AttentionSettings& settings) {
  if (tokens.tokens.empty() || !tokens.tokens.back().is_interval)
    throw DataError("visit token set must end with the interval token");

  // Token embedding matrix: per-type gathers in global order, interval row last.
  std::vector<Var> parts;
  std::size_t begin = 0;
  for (auto t : kEventTypes) {
    std::vector<std::size_t> rows;
    while (begin < tokens.interval_index() && tokens.tokens[begin].type == t) rows.push_back(tokens.tokens[begin++].code);
    if (rows.empty()) continue;
    const Var table = embeddings.tables[index_of(t)];
    if (!table.valid()) throw DataError("visit uses event type '" + std::string(event_key(t)) + "' with no vocabulary");
    parts.push_back(tape.gather_rows(table, rows));
  }
  if (begin != tokens.interval_index()) throw DataError("visit tokens are not in global event-type order");
  parts.push_back(interval_embedding);
  const Var all = parts.size() == 1 ? parts[0] : tape.concat_rows(parts);

  AttentionOutput out;
  std::vector<std::size_t> slots;
  const bool aware = settings.mode == AttentionMode::TaskAware;
  const std::size_t num_slots = visit_slot_count(vocab, settings);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& tok = tokens.tokens[i];
    if (tok.is_interval) {
      out.queries.push_back(i);
      slots.push_back(num_slots - 1);
    } else if (!aware) {
      out.queries.push_back(i);
      slots.push_back(vocab.offset(tok.type) + tok.code);
    } else if (tok.type == settings.primary) {
      out.queries.push_back(i);
      slots.push_back(tok.code);
    }
  }

  const Var queries = out.queries.size() == tokens.size() ? all : tape.gather_rows(all, out.queries);
  Var per_token = queries;
  if (settings.cross_enabled) {
    const double n = static_cast<double>(tape.value(all).cols());
    const Var logits = tape.scale(tape.matmul_transposed(queries, all), 1.0 / std::sqrt(n));
    out.weights = tape.softmax_rows(logits);
    per_token = tape.add(queries, tape.matmul(out.weights, all));
  }
  out.visit_vector = tape.place_rows(per_token, slots, num_slots);
  return out;
}

std::string token_type_key(const TokenRef& t) { return t.is_interval ? "time" : std::string(event_key(t.type)); }

namespace {
std::string token_name(const TokenRef& t, const VocabSpec& vocab) {
  return t.is_interval ? "interval" : vocab.code_name(t.type, t.code);
}
}  // namespace

std::vector<AttentionEntry> export_weights(const Tensor& weights, const VisitTokenSet& tokens,
                                           const std::vector<std::size_t>& queries, const VocabSpec& vocab) {
  if (weights.rows() != queries.size() || weights.cols() != tokens.size())
    throw ShapeError("export_weights: weight matrix " + to_string(weights.shape()) + " does not match " +
                     std::to_string(queries.size()) + " queries x " + std::to_string(tokens.size()) + " keys");
  std::vector<AttentionEntry> out;
  for (std::size_t r = 0; r < queries.size(); ++r) {
    const auto& q = tokens.tokens[queries[r]];
    std::vector<AttentionEntry> row;
    for (std::size_t k = 0; k < tokens.size(); ++k) {
      const auto& key = tokens.tokens[k];
      row.push_back({token_type_key(q), q.code, token_name(q, vocab), token_type_key(key), key.code,
                     token_name(key, vocab), weights.at(r, k)});
    }
    std::stable_sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.weight > b.weight; });
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

std::string attention_csv(const std::vector<AttentionEntry>& entries) {
  std::ostringstream out;
  out << "query_type,query_code,key_type,key_code,weight\n";
  for (const auto& e : entries) {
    char w[32];
    std::snprintf(w, sizeof w, "%.10g", e.weight);
    out << e.query_type << ',' << e.query_code << ',' << e.key_type << ',' << e.key_code << ',' << w << '\n';
  }
  return out.str();
}

void AttentionAccumulator::add(const std::vector<AttentionEntry>& visit_entries) {
  std::map<std::uint32_t, bool> seen;
  for (const auto& e : visit_entries) {
    if (e.query_type != query_type_) continue;
    auto& q = queries_[e.query_code];
    if (!seen[e.query_code]) {
      seen[e.query_code] = true;
      q.name = e.query_name;
      ++q.visits;
    }
    if (e.key_type != key_type_) continue;
    auto& k = q.keys[e.key_code];
    k.first = e.key_name;
    k.second += e.weight;
  }
}

std::vector<AttentionEntry> AttentionAccumulator::result(std::size_t top) const {
  std::vector<AttentionEntry> out;
  for (const auto& [qcode, q] : queries_) {
    std::vector<AttentionEntry> row;
    for (const auto& [kcode, k] : q.keys)
      row.push_back({query_type_, qcode, q.name, key_type_, kcode, k.first, k.second / static_cast<double>(q.visits)});
    std::stable_sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.weight > b.weight; });
    if (row.size() > top) row.resize(top);
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

}  // namespace catnet
