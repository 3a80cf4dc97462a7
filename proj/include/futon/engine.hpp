#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "futon/event.hpp"
#include "futon/parser.hpp"
#include "futon/pattern.hpp"

namespace futon {

enum class SelectionMode { greedy, sampled, explore };
enum class Outcome { success, failure, unknown };

const char* to_string(SelectionMode mode);
const char* to_string(Outcome outcome);
std::optional<SelectionMode> selection_mode_from_string(std::string_view s);
std::optional<Outcome> outcome_from_string(std::string_view s);

// Scoring weights and policy-precision dynamics. Every key can be set from a
// `key = value` config file (see parse_engine_config).
struct EngineConfig {
  double w_prior = 1.0;
  double w_success = 1.0;
  double w_relevance = 1.0;
  double w_epistemic = 1.0;

  double lambda = 0.2;  // error EWMA rate
  double alpha = 1.0;   // error -> tau gain
  double beta = 1.0;    // score spread -> tau damping
  double tau0 = 1.0;
  double tau_min = 0.05;
  double tau_max = 5.0;
  std::int64_t min_samples = 5;
  double epsilon = 1e-9;

  // Also enter explore mode when tau < min_samples (literal reading of the
  // exploratory trigger). Off by default.
  bool literal_tau_trigger = false;
  // Let the automatic min-sample trigger admit :stub patterns too. Off by
  // default: stubs need the explicit explore flag.
  bool auto_explore_admits_stubs = false;

  friend bool operator==(const EngineConfig&, const EngineConfig&) = default;
};

// Applies one `key = value` setting; throws Error(invalid_argument) for an
// unknown key or malformed value.
void set_config_value(EngineConfig& config, std::string_view key,
                      std::string_view value);
// Key/value text: one `key = value` per line, '#' starts a comment.
std::map<std::string, std::string> parse_key_values(std::string_view text);
EngineConfig parse_engine_config(std::string_view text);

struct PatternBelief {
  std::int64_t uses = 0;
  std::int64_t successes = 0;
  std::int64_t failures = 0;
  std::int64_t evidence_events = 0;
  Seq last_updated = -1;

  friend bool operator==(const PatternBelief&, const PatternBelief&) = default;
};

// Engine beliefs for one session. Policy precision and the error proxy are
// session-wide; counts are per pattern.
struct BeliefState {
  std::map<PatternId, PatternBelief> patterns;
  double tau = 1.0;
  std::int64_t tau_observation_count = 0;
  double error_ewma = 0.0;
  std::optional<double> len_baseline;

  const PatternBelief& at(const PatternId& id) const;

  friend bool operator==(const BeliefState&, const BeliefState&) = default;
};

BeliefState initial_beliefs(std::span<const PatternId> ids,
                            const EngineConfig& config);

// Additive contributions to G; G is their sum.
struct ScoreComponents {
  double prior = 0.0;
  double success = 0.0;
  double relevance = 0.0;
  double epistemic = 0.0;

  friend bool operator==(const ScoreComponents&, const ScoreComponents&) = default;
};

struct CandidateScore {
  PatternId pattern_id;
  Maturity maturity = Maturity::stub;
  double G = 0.0;
  ScoreComponents components;
  double probability = 0.0;

  friend bool operator==(const CandidateScore&, const CandidateScore&) = default;
};

struct SelectionRecord {
  std::string intent;
  std::vector<CandidateScore> candidates;
  PatternId chosen;
  double tau_used = 1.0;
  SelectionMode mode = SelectionMode::sampled;
  std::uint64_t rng_seed = 0;
  std::string rationale;

  const CandidateScore* find(const PatternId& id) const;

  friend bool operator==(const SelectionRecord&, const SelectionRecord&) = default;
};

struct BeliefDelta {
  std::int64_t uses = 0;
  std::int64_t successes = 0;
  std::int64_t failures = 0;

  friend bool operator==(const BeliefDelta&, const BeliefDelta&) = default;
};

struct UseRecord {
  PatternId pattern_id;
  Seq anchor = -1;
  Outcome outcome = Outcome::unknown;
  std::string evidence_note;
  BeliefDelta belief_delta;

  friend bool operator==(const UseRecord&, const UseRecord&) = default;
};

BeliefDelta delta_for(Outcome outcome);

void to_json(nlohmann::json& j, const EngineConfig& c);
void from_json(const nlohmann::json& j, EngineConfig& c);
void to_json(nlohmann::json& j, const PatternBelief& b);
void from_json(const nlohmann::json& j, PatternBelief& b);
void to_json(nlohmann::json& j, const BeliefState& b);
void from_json(const nlohmann::json& j, BeliefState& b);
void to_json(nlohmann::json& j, const CandidateScore& c);
void from_json(const nlohmann::json& j, CandidateScore& c);
void to_json(nlohmann::json& j, const SelectionRecord& r);
void from_json(const nlohmann::json& j, SelectionRecord& r);
void to_json(nlohmann::json& j, const UseRecord& r);
void from_json(const nlohmann::json& j, UseRecord& r);

// Lexical applicability of a pattern to an intent.
using RelevanceScorer =
    std::function<double(std::string_view intent, const PatternDocument& doc)>;

// Jaccard similarity of case-folded word sets: intent vs summary + context.
double relevance(std::string_view intent, const PatternDocument& doc);

CandidateScore expected_free_energy(const PatternDocument& doc,
                                    const BeliefState& beliefs,
                                    std::string_view intent, SelectionMode mode,
                                    const EngineConfig& config,
                                    const RelevanceScorer& scorer = relevance);

// Softmax over -G/tau with max-subtraction. Input order is preserved.
// Throws Error(no_candidates) on an empty list, Error(invalid_argument) for
// tau <= 0 or non-finite G.
std::vector<CandidateScore> selection_distribution(
    std::span<const CandidateScore> scores, double tau);

// Inverse-CDF draw (greedy mode takes the highest probability). Exact
// boundary hits resolve to the lower index.
SelectionRecord sample_selection(std::span<const CandidateScore> dist,
                                 std::uint64_t seed, std::string_view intent,
                                 SelectionMode mode, double tau);

SelectionMode explore_trigger(const BeliefState& beliefs, bool explicit_flag,
                              std::int64_t min_samples,
                              const EngineConfig& config = {});

bool admits_stubs(SelectionMode mode, bool explicit_flag,
                  const EngineConfig& config);

// Folds one roster event (pattern-read/update/implement, pur) into the
// beliefs. Other event types leave the state unchanged. Throws
// Error(unknown_pattern) when the event names a pattern the beliefs do not
// track.
BeliefState update_beliefs(const BeliefState& beliefs, const TraceEvent& event);

struct TauObservation {
  double text_length = 0.0;
  double spread = 0.0;  // stddev(G) / (|mean(G)| + epsilon)
};

double score_spread(std::span<const CandidateScore> scores, double epsilon = 1e-9);

BeliefState update_tau(const BeliefState& beliefs, const TauObservation& obs,
                       const EngineConfig& config);

struct SelectRequest {
  std::string intent;
  std::uint64_t seed = 0;
  bool explore_flag = false;
  bool greedy = false;
  std::optional<double> tau_override;
};

// Scores every eligible pattern of the library (stubs only when admitted),
// builds the distribution and samples. Throws Error(no_candidates) when no
// pattern is eligible.
SelectionRecord select_pattern(const PatternLibrary& library,
                               const BeliefState& beliefs,
                               const SelectRequest& request,
                               const EngineConfig& config,
                               const RelevanceScorer& scorer = relevance);

// Scored candidate table with probabilities; used by select_pattern and by
// the runner when an agent announces its own choice.
std::vector<CandidateScore> score_library(const PatternLibrary& library,
                                          const BeliefState& beliefs,
                                          std::string_view intent,
                                          SelectionMode mode, bool include_stubs,
                                          const EngineConfig& config,
                                          const RelevanceScorer& scorer = relevance);

}  // namespace futon
