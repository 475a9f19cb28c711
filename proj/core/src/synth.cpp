// SPDX-License-Identifier: Apache-2.0
#include "catnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "catnet/error.hpp"
#include "catnet/rng.hpp"
#include "json.hpp"

namespace catnet {

using ojson = nlohmann::ordered_json;

double PlantedRule::logit_shift(double gap_days) const {
  return std::log(boost) * std::exp2(-gap_days / decay_halflife_days);
}

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_ref(const CodeRef& ref, const GenConfig& c, const std::string& what) {
  if (ref.code >= c.vocab_sizes[index_of(ref.type)])
    throw ConfigError(what + " code " + std::string(event_key(ref.type)) + ":" + std::to_string(ref.code) +
                      " outside vocabulary");
}

double round6(double x) { return std::round(x * 1e6) / 1e6; }

}  // namespace

void GenConfig::validate() const {
  if (n_patients == 0) throw ConfigError("n_patients must be positive");
  if (std::all_of(vocab_sizes.begin(), vocab_sizes.end(), [](auto s) { return s == 0; }))
    throw ConfigError("vocabulary must contain at least one code");
  if (min_visits < 2) throw ConfigError("min_visits must be at least 2");
  if (max_visits < min_visits) throw ConfigError("max_visits must be >= min_visits");
  if (!(continue_prob >= 0.0 && continue_prob <= 1.0)) throw ConfigError("continue_prob must lie in [0, 1]");
  if (!std::isfinite(gap_log_mu)) throw ConfigError("gap_log_mu must be finite");
  if (!(gap_log_sigma >= 0.0) || !(gap_patient_sigma >= 0.0)) throw ConfigError("gap sigmas must be non-negative");
  for (double p : base_prevalence)
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("base prevalences must lie in (0, 1)");
  for (const auto& r : rules) {
    if (!(r.boost > 1.0)) throw ConfigError("rule boost must exceed 1");
    if (!(r.decay_halflife_days > 0.0)) throw ConfigError("rule halflife must be positive");
    check_ref(r.trigger, *this, "rule trigger");
    check_ref(r.effect, *this, "rule effect");
  }
  for (const auto& s : mortality.severe_codes) check_ref(s, *this, "severe");
  if (!std::isfinite(mortality.base_logit) || !std::isfinite(mortality.per_code_logit))
    throw ConfigError("mortality coefficients must be finite");
  if (!(age_sd >= 0.0)) throw ConfigError("age_sd must be non-negative");
}

VocabSpec GenConfig::vocab() const {
  VocabSpec v;
  v.sizes = vocab_sizes;
  return v;
}

GenConfig default_gen_config() {
  GenConfig c;
  c.rules = {
      {{EventType::Diag, 3}, {EventType::Med, 7}, 8.0, 30.0},
      {{EventType::Lab, 2}, {EventType::Med, 4}, 8.0, 30.0},
      {{EventType::Proc, 1}, {EventType::Med, 9}, 8.0, 30.0},
  };
  c.mortality.severe_codes = {{EventType::Diag, 0}, {EventType::Diag, 1}, {EventType::Proc, 0}};
  return c;
}

namespace {

ojson ref_to_json(const CodeRef& r) { return {{"type", std::string(event_key(r.type))}, {"code", r.code}}; }

CodeRef ref_from_json(const ojson& j) {
  const auto key = j.at("type").get<std::string>();
  const auto type = parse_event_type(key);
  if (!type) throw ConfigError("unknown event type '" + key + "'");
  return {*type, j.at("code").get<std::uint32_t>()};
}

template <typename T>
std::array<T, kNumEventTypes> per_type(const ojson& j, std::array<T, kNumEventTypes> fallback) {
  for (auto t : kEventTypes)
    if (j.contains(std::string(event_key(t)))) fallback[index_of(t)] = j.at(std::string(event_key(t))).get<T>();
  return fallback;
}

}  // namespace

GenConfig gen_config_from_json(std::string_view text) {
  GenConfig c = default_gen_config();
  try {
    const auto j = ojson::parse(text);
    c.n_patients = j.value("n_patients", c.n_patients);
    c.seed = j.value("seed", c.seed);
    if (j.contains("vocab")) c.vocab_sizes = per_type(j["vocab"], c.vocab_sizes);
    if (j.contains("visits")) {
      const auto& v = j["visits"];
      c.min_visits = v.value("min", c.min_visits);
      c.max_visits = v.value("max", c.max_visits);
      c.continue_prob = v.value("continue_prob", c.continue_prob);
    }
    if (j.contains("gap")) {
      const auto& g = j["gap"];
      c.gap_log_mu = g.value("log_mu", c.gap_log_mu);
      c.gap_log_sigma = g.value("log_sigma", c.gap_log_sigma);
      c.gap_patient_sigma = g.value("patient_log_sigma", c.gap_patient_sigma);
    }
    if (j.contains("base_prevalence")) c.base_prevalence = per_type(j["base_prevalence"], c.base_prevalence);
    if (j.contains("rules")) {
      c.rules.clear();
      for (const auto& r : j["rules"])
        c.rules.push_back({ref_from_json(r.at("trigger")), ref_from_json(r.at("effect")), r.at("boost").get<double>(),
                           r.at("halflife_days").get<double>()});
    }
    if (j.contains("mortality")) {
      const auto& m = j["mortality"];
      if (m.contains("severe_codes")) {
        c.mortality.severe_codes.clear();
        for (const auto& s : m["severe_codes"]) c.mortality.severe_codes.push_back(ref_from_json(s));
      }
      c.mortality.base_logit = m.value("base_logit", c.mortality.base_logit);
      c.mortality.per_code_logit = m.value("per_code_logit", c.mortality.per_code_logit);
    }
    if (j.contains("age")) {
      c.age_mean = j["age"].value("mean", c.age_mean);
      c.age_sd = j["age"].value("sd", c.age_sd);
    }
  } catch (const ojson::exception& e) {
    throw ConfigError(std::string("invalid generator config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string gen_config_to_json(const GenConfig& c) {
  ojson j;
  j["n_patients"] = c.n_patients;
  j["seed"] = c.seed;
  ojson vocab, prev;
  for (auto t : kEventTypes) {
    vocab[std::string(event_key(t))] = c.vocab_sizes[index_of(t)];
    prev[std::string(event_key(t))] = c.base_prevalence[index_of(t)];
  }
  j["vocab"] = vocab;
  j["visits"] = {{"min", c.min_visits}, {"max", c.max_visits}, {"continue_prob", c.continue_prob}};
  j["gap"] = {{"log_mu", c.gap_log_mu}, {"log_sigma", c.gap_log_sigma}, {"patient_log_sigma", c.gap_patient_sigma}};
  j["base_prevalence"] = prev;
  ojson rules = ojson::array();
  for (const auto& r : c.rules)
    rules.push_back({{"trigger", ref_to_json(r.trigger)},
                     {"effect", ref_to_json(r.effect)},
                     {"boost", r.boost},
                     {"halflife_days", r.decay_halflife_days}});
  j["rules"] = rules;
  ojson severe = ojson::array();
  for (const auto& s : c.mortality.severe_codes) severe.push_back(ref_to_json(s));
  j["mortality"] = {{"severe_codes", severe},
                    {"base_logit", c.mortality.base_logit},
                    {"per_code_logit", c.mortality.per_code_logit}};
  j["age"] = {{"mean", c.age_mean}, {"sd", c.age_sd}};
  return j.dump(2);
}

Cohort generate(const GenConfig& config, std::uint64_t seed) {
  config.validate();
  Cohort cohort;
  cohort.vocab = config.vocab();
  cohort.patients.reserve(config.n_patients);

  std::array<double, kNumEventTypes> base_logit{};
  for (auto t : kEventTypes) base_logit[index_of(t)] = logit(config.base_prevalence[index_of(t)]);

  constexpr std::uint64_t kMortalityStream = 1ULL << 40;
  for (std::size_t p = 0; p < config.n_patients; ++p) {
    Rng patient_rng = Rng::substream(seed, p, 0);
    PatientRecord rec;
    char id[32];
    std::snprintf(id, sizeof id, "P%06zu", p);
    rec.patient_id = id;
    rec.demographics.age_years = round6(std::clamp(config.age_mean + config.age_sd * patient_rng.normal(), 18.0, 100.0));
    rec.demographics.sex = patient_rng.bernoulli(0.5) ? Sex::Female : Sex::Male;

    std::size_t n_visits = config.min_visits;
    while (n_visits < config.max_visits && patient_rng.bernoulli(config.continue_prob)) ++n_visits;
    const double patient_mu = config.gap_log_mu + config.gap_patient_sigma * patient_rng.normal();
    double time = round6(patient_rng.uniform(0.0, 365.0));

    for (std::size_t v = 0; v < n_visits; ++v) {
      Rng visit_rng = Rng::substream(seed, p, v + 1);
      Visit visit;
      double gap = 0.0;
      if (v > 0) {
        gap = std::exp(patient_mu + config.gap_log_sigma * visit_rng.normal());
        double next = round6(time + gap);
        if (next <= time) next = time + 1e-6;
        gap = next - time;
        time = next;
      }
      visit.time_days = time;
      for (auto t : kEventTypes) {
        const auto ti = index_of(t);
        for (std::uint32_t code = 0; code < config.vocab_sizes[ti]; ++code) {
          double l = base_logit[ti];
          if (v > 0) {
            const auto& prev = rec.visits.back();
            for (const auto& rule : config.rules)
              if (rule.effect.type == t && rule.effect.code == code && prev.has(rule.trigger.type, rule.trigger.code))
                l += rule.logit_shift(gap);
          }
          if (visit_rng.bernoulli(sigmoid(l))) visit.codes_of(t).push_back(code);
        }
      }
      rec.visits.push_back(std::move(visit));
    }

    std::size_t severe = 0;
    for (std::size_t v = rec.visits.size() - 2; v < rec.visits.size(); ++v)
      for (const auto& s : config.mortality.severe_codes) severe += rec.visits[v].has(s.type, s.code) ? 1 : 0;
    Rng mort_rng = Rng::substream(seed, p, kMortalityStream);
    rec.mortality = mort_rng.bernoulli(
        sigmoid(config.mortality.base_logit + config.mortality.per_code_logit * static_cast<double>(severe)));
    cohort.patients.push_back(std::move(rec));
  }
  return cohort;
}

std::string describe(const GenConfig& config) {
  std::ostringstream out;
  out << "synthetic cohort: " << config.n_patients << " patients, seed " << config.seed << "\n";
  const double extra = config.continue_prob >= 1.0 ? double(config.max_visits - config.min_visits)
                                                    : config.continue_prob / (1.0 - config.continue_prob);
  out << "visits per patient: min " << config.min_visits << ", max " << config.max_visits << ", expected ~"
      << std::min<double>(config.max_visits, config.min_visits + extra) << "\n";
  out << "inter-visit gap: lognormal(mu=" << config.gap_log_mu << ", sigma=" << config.gap_log_sigma
      << "), patient spread " << config.gap_patient_sigma << ", median " << std::exp(config.gap_log_mu) << " days\n";
  out << "event types: " << kNumEventTypes << "\n";
  out << "  type  codes  base_prevalence\n";
  for (auto t : kEventTypes) {
    char line[96];
    std::snprintf(line, sizeof line, "  %-4s  %5zu  %.4f\n", std::string(event_key(t)).c_str(),
                  config.vocab_sizes[index_of(t)], config.base_prevalence[index_of(t)]);
    out << line;
  }
  out << config.rules.size() << " planted rules\n";
  if (!config.rules.empty()) {
    out << "  trigger   effect    boost  halflife_d  p(effect|gap=0)  p(effect|gap=halflife)\n";
    for (const auto& r : config.rules) {
      const double base = logit(config.base_prevalence[index_of(r.effect.type)]);
      char line[160];
      std::snprintf(line, sizeof line, "  %-4s:%-3u  %-4s:%-3u  %5.1f  %10.1f  %15.4f  %22.4f\n",
                    std::string(event_key(r.trigger.type)).c_str(), r.trigger.code,
                    std::string(event_key(r.effect.type)).c_str(), r.effect.code, r.boost, r.decay_halflife_days,
                    sigmoid(base + r.logit_shift(0.0)), sigmoid(base + r.logit_shift(r.decay_halflife_days)));
      out << line;
    }
  }
  out << "mortality: " << config.mortality.severe_codes.size() << " severe codes, base logit "
      << config.mortality.base_logit << ", per-code logit " << config.mortality.per_code_logit << "\n";
  return out.str();
}

}  // namespace catnet
