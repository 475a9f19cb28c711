// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "catnet/cohort.hpp"
#include "catnet/rng.hpp"
#include "catnet/tape.hpp"

namespace catnet {

/// One learnable n-wide embedding table per event type. Types with an empty
/// vocabulary have no table.
struct CodeEmbeddings {
  std::array<std::optional<Parameter>, kNumEventTypes> tables;

  std::size_t width() const;
};

CodeEmbeddings make_code_embeddings(const VocabSpec& vocab, std::size_t width, Rng& rng, double stddev = 0.3);

struct CodeEmbeddingVars {
  std::array<Var, kNumEventTypes> tables;
};

CodeEmbeddingVars bind(Tape& tape, CodeEmbeddings& embeddings);

/// Identifies a token: a present code, or the visit's interval token.
struct TokenRef {
  bool is_interval = false;
  EventType type = EventType::Med;
  std::uint32_t code = 0;

  friend bool operator==(const TokenRef&, const TokenRef&) = default;
};

/// Present codes in global order (med, diag, lab, proc; ascending code), then
/// the interval token last.
struct VisitTokenSet {
  std::vector<TokenRef> tokens;

  std::size_t size() const noexcept { return tokens.size(); }
  std::size_t interval_index() const noexcept { return tokens.size() - 1; }
};

VisitTokenSet build_tokens(const Visit& visit);

struct AttentionSettings {
  AttentionMode mode = AttentionMode::TaskAware;
  /// Primary event type; used by task-aware mode.
  EventType primary = EventType::Med;
  /// When false the attention is skipped and o_t carries the raw query embeddings.
  bool cross_enabled = true;
};

/// Number of n-wide slots in o_t: |primary vocab| + 1 (task-aware) or
/// M + D + L + P + 1 (task-unaware).
std::size_t visit_slot_count(const VocabSpec& vocab, const AttentionSettings& settings);

struct AttentionOutput {
  Var visit_vector;                 // 1 x (slots * n)
  Var weights;                      // queries x keys; invalid when cross attention is disabled
  std::vector<std::size_t> queries; // token indices used as queries, in row order
};

/// Cross-event attention over one visit. Keys and values are all tokens;
/// queries are the primary-type tokens plus the interval token (task-aware) or
/// every token (task-unaware). Each query's output is its embedding plus the
/// softmax(q K^T / sqrt(n))-weighted sum of key embeddings, placed in its
/// fixed vocabulary slot.
AttentionOutput attend(Tape& tape, const CodeEmbeddingVars& embeddings, Var interval_embedding,
                       const VisitTokenSet& tokens, const VocabSpec& vocab, const AttentionSettings& settings);

struct AttentionEntry {
  std::string query_type;
  std::uint32_t query_code = 0;
  std::string query_name;
  std::string key_type;
  std::uint32_t key_code = 0;
  std::string key_name;
  double weight = 0.0;
};

std::string token_type_key(const TokenRef& t);

/// Flattens one attention matrix into (query, key, weight) rows, sorted by
/// weight descending within each query (queries keep their row order).
std::vector<AttentionEntry> export_weights(const Tensor& weights, const VisitTokenSet& tokens,
                                           const std::vector<std::size_t>& queries, const VocabSpec& vocab);

/// Averages per-visit entries into one row per (query, key) pair. A query's
/// weights are averaged over the visits where it was present; a key absent from
/// a visit contributes 0 there. Only rows whose types match `query_type` and
/// `key_type` ("med", "diag", "lab", "proc" or "time") are kept, at most `top`
/// keys per query, ordered by query then descending weight.
class AttentionAccumulator {
 public:
  AttentionAccumulator(std::string query_type, std::string key_type) : query_type_(std::move(query_type)), key_type_(std::move(key_type)) {}

  void add(const std::vector<AttentionEntry>& visit_entries);
  std::vector<AttentionEntry> result(std::size_t top) const;

 private:
  struct QueryStats {
    std::string name;
    std::size_t visits = 0;
    std::map<std::uint32_t, std::pair<std::string, double>> keys;  // code -> (name, weight sum)
  };
  std::string query_type_;
  std::string key_type_;
  std::map<std::uint32_t, QueryStats> queries_;
};

/// Writes `query_type,query_code,key_type,key_code,weight` rows.
std::string attention_csv(const std::vector<AttentionEntry>& entries);

}  // namespace catnet
