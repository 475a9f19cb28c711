// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "catnet/cohort.hpp"

namespace catnet {

struct CodeRef {
  EventType type = EventType::Med;
  std::uint32_t code = 0;

  friend bool operator==(const CodeRef&, const CodeRef&) = default;
};

/// A trigger code at visit t raises the log-odds of the effect code at visit
/// t + 1 by ln(boost) * 2^(-gap / halflife).
struct PlantedRule {
  CodeRef trigger;
  CodeRef effect;
  double boost = 2.0;
  double decay_halflife_days = 30.0;

  double logit_shift(double gap_days) const;
};

/// Mortality label ~ Bernoulli(sigmoid(base_logit + per_code_logit * count)), where
/// count is the number of severe-code occurrences in the final two visits.
struct MortalityRule {
  std::vector<CodeRef> severe_codes;
  double base_logit = -2.0;
  double per_code_logit = 1.0;
};

struct GenConfig {
  std::size_t n_patients = 500;
  std::array<std::size_t, kNumEventTypes> vocab_sizes{12, 10, 8, 6};
  std::size_t min_visits = 2;
  std::size_t max_visits = 29;
  /// After min_visits, another visit follows with this probability (truncated at max_visits).
  double continue_prob = 0.37;
  /// Gap ~ LogNormal(mu_p, gap_log_sigma) days, with per-patient mu_p ~ N(gap_log_mu, gap_patient_sigma).
  double gap_log_mu = 3.4;
  double gap_log_sigma = 0.5;
  double gap_patient_sigma = 0.0;
  std::array<double, kNumEventTypes> base_prevalence{0.1, 0.1, 0.1, 0.1};
  std::vector<PlantedRule> rules;
  MortalityRule mortality;
  double age_mean = 65.0;
  double age_sd = 15.0;
  std::uint64_t seed = 0;

  void validate() const;
  VocabSpec vocab() const;
};

/// Three diagnosis/labtest/procedure -> medication rules over a 12/10/8/6 vocabulary.
GenConfig default_gen_config();

GenConfig gen_config_from_json(std::string_view text);
std::string gen_config_to_json(const GenConfig& config);

/// Pure function of (config, seed): every patient and visit draws from its own
/// substream, so results do not depend on generation order.
Cohort generate(const GenConfig& config, std::uint64_t seed);
inline Cohort generate(const GenConfig& config) { return generate(config, config.seed); }

std::string describe(const GenConfig& config);

}  // namespace catnet
