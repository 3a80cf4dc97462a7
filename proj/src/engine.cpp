#include "futon/engine.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "futon/error.hpp"
#include "futon/rng.hpp"

namespace futon {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_double(std::string_view key, std::string_view value) {
  std::string text(value);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty() || !std::isfinite(out)) {
    throw Error(ErrorCode::invalid_argument,
                "config key '" + std::string(key) + "': not a number: " + text);
  }
  return out;
}

std::int64_t parse_int(std::string_view key, std::string_view value) {
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw Error(ErrorCode::invalid_argument,
                "config key '" + std::string(key) + "': not an integer: " +
                    std::string(value));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error(ErrorCode::invalid_argument,
              "config key '" + std::string(key) + "': not a boolean: " +
                  std::string(value));
}

std::set<std::string> word_set(std::string_view text) {
  std::set<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      words.insert(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.insert(std::move(current));
  return words;
}

void validate_config(const EngineConfig& c) {
  if (!(c.tau_min > 0.0) || !(c.tau_max >= c.tau_min)) {
    throw Error(ErrorCode::invalid_argument, "tau bounds must satisfy 0 < tau_min <= tau_max");
  }
  if (!(c.tau0 > 0.0)) throw Error(ErrorCode::invalid_argument, "tau0 must be positive");
  if (c.lambda < 0.0 || c.lambda > 1.0) {
    throw Error(ErrorCode::invalid_argument, "lambda must lie in [0, 1]");
  }
  if (c.min_samples < 0) {
    throw Error(ErrorCode::invalid_argument, "min_samples must be non-negative");
  }
}

PatternBelief& belief_for(BeliefState& state, const std::string& id) {
  auto it = state.patterns.find(id);
  if (it == state.patterns.end()) {
    throw Error(ErrorCode::unknown_pattern, "unknown pattern '" + id + "'");
  }
  return it->second;
}

}  // namespace

const char* to_string(SelectionMode mode) {
  switch (mode) {
    case SelectionMode::greedy:
      return "greedy";
    case SelectionMode::sampled:
      return "sampled";
    case SelectionMode::explore:
      return "explore";
  }
  return "sampled";
}

const char* to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::success:
      return "success";
    case Outcome::failure:
      return "failure";
    case Outcome::unknown:
      return "unknown";
  }
  return "unknown";
}

std::optional<SelectionMode> selection_mode_from_string(std::string_view s) {
  if (s == "greedy") return SelectionMode::greedy;
  if (s == "sampled") return SelectionMode::sampled;
  if (s == "explore") return SelectionMode::explore;
  return std::nullopt;
}

std::optional<Outcome> outcome_from_string(std::string_view s) {
  if (s == "success") return Outcome::success;
  if (s == "failure") return Outcome::failure;
  if (s == "unknown") return Outcome::unknown;
  return std::nullopt;
}

void set_config_value(EngineConfig& c, std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "w_prior") c.w_prior = parse_double(key, value);
  else if (key == "w_success") c.w_success = parse_double(key, value);
  else if (key == "w_relevance") c.w_relevance = parse_double(key, value);
  else if (key == "w_epistemic") c.w_epistemic = parse_double(key, value);
  else if (key == "lambda") c.lambda = parse_double(key, value);
  else if (key == "alpha") c.alpha = parse_double(key, value);
  else if (key == "beta") c.beta = parse_double(key, value);
  else if (key == "tau0") c.tau0 = parse_double(key, value);
  else if (key == "tau_min") c.tau_min = parse_double(key, value);
  else if (key == "tau_max") c.tau_max = parse_double(key, value);
  else if (key == "min_samples") c.min_samples = parse_int(key, value);
  else if (key == "epsilon") c.epsilon = parse_double(key, value);
  else if (key == "literal_tau_trigger") c.literal_tau_trigger = parse_bool(key, value);
  else if (key == "auto_explore_admits_stubs")
    c.auto_explore_admits_stubs = parse_bool(key, value);
  else
    throw Error(ErrorCode::invalid_argument, "unknown config key '" + std::string(key) + "'");
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::invalid_argument,
                  "config line " + std::to_string(line_no) + ": expected key = value");
    }
    out[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

EngineConfig parse_engine_config(std::string_view text) {
  EngineConfig c;
  for (const auto& [key, value] : parse_key_values(text)) {
    set_config_value(c, key, value);
  }
  validate_config(c);
  return c;
}

const PatternBelief& BeliefState::at(const PatternId& id) const {
  auto it = patterns.find(id);
  if (it == patterns.end()) {
    throw Error(ErrorCode::unknown_pattern, "unknown pattern '" + id + "'");
  }
  return it->second;
}

BeliefState initial_beliefs(std::span<const PatternId> ids, const EngineConfig& config) {
  validate_config(config);
  BeliefState state;
  for (const auto& id : ids) state.patterns.emplace(id, PatternBelief{});
  state.tau = std::clamp(config.tau0, config.tau_min, config.tau_max);
  return state;
}

const CandidateScore* SelectionRecord::find(const PatternId& id) const {
  for (const auto& c : candidates) {
    if (c.pattern_id == id) return &c;
  }
  return nullptr;
}

BeliefDelta delta_for(Outcome outcome) {
  switch (outcome) {
    case Outcome::success:
      return {1, 1, 0};
    case Outcome::failure:
      return {1, 0, 1};
    case Outcome::unknown:
      return {1, 0, 0};
  }
  return {1, 0, 0};
}

// ---- JSON -----------------------------------------------------------------

void to_json(nlohmann::json& j, const EngineConfig& c) {
  j = {{"w_prior", c.w_prior},
       {"w_success", c.w_success},
       {"w_relevance", c.w_relevance},
       {"w_epistemic", c.w_epistemic},
       {"lambda", c.lambda},
       {"alpha", c.alpha},
       {"beta", c.beta},
       {"tau0", c.tau0},
       {"tau_min", c.tau_min},
       {"tau_max", c.tau_max},
       {"min_samples", c.min_samples},
       {"epsilon", c.epsilon},
       {"literal_tau_trigger", c.literal_tau_trigger},
       {"auto_explore_admits_stubs", c.auto_explore_admits_stubs}};
}

void from_json(const nlohmann::json& j, EngineConfig& c) {
  c.w_prior = j.at("w_prior").get<double>();
  c.w_success = j.at("w_success").get<double>();
  c.w_relevance = j.at("w_relevance").get<double>();
  c.w_epistemic = j.at("w_epistemic").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.alpha = j.at("alpha").get<double>();
  c.beta = j.at("beta").get<double>();
  c.tau0 = j.at("tau0").get<double>();
  c.tau_min = j.at("tau_min").get<double>();
  c.tau_max = j.at("tau_max").get<double>();
  c.min_samples = j.at("min_samples").get<std::int64_t>();
  c.epsilon = j.at("epsilon").get<double>();
  c.literal_tau_trigger = j.at("literal_tau_trigger").get<bool>();
  c.auto_explore_admits_stubs = j.at("auto_explore_admits_stubs").get<bool>();
}

void to_json(nlohmann::json& j, const PatternBelief& b) {
  j = {{"uses", b.uses},
       {"successes", b.successes},
       {"failures", b.failures},
       {"evidence_events", b.evidence_events},
       {"last_updated", b.last_updated}};
}

void from_json(const nlohmann::json& j, PatternBelief& b) {
  b.uses = j.at("uses").get<std::int64_t>();
  b.successes = j.at("successes").get<std::int64_t>();
  b.failures = j.at("failures").get<std::int64_t>();
  b.evidence_events = j.at("evidence_events").get<std::int64_t>();
  b.last_updated = j.at("last_updated").get<Seq>();
}

void to_json(nlohmann::json& j, const BeliefState& b) {
  j = {{"patterns", b.patterns},
       {"tau", b.tau},
       {"tau_observation_count", b.tau_observation_count},
       {"error_ewma", b.error_ewma},
       {"len_baseline", b.len_baseline ? nlohmann::json(*b.len_baseline)
                                       : nlohmann::json(nullptr)}};
}

void from_json(const nlohmann::json& j, BeliefState& b) {
  b.patterns = j.at("patterns").get<std::map<PatternId, PatternBelief>>();
  b.tau = j.at("tau").get<double>();
  b.tau_observation_count = j.at("tau_observation_count").get<std::int64_t>();
  b.error_ewma = j.at("error_ewma").get<double>();
  const auto& base = j.at("len_baseline");
  b.len_baseline = base.is_null() ? std::nullopt : std::optional<double>(base.get<double>());
}

void to_json(nlohmann::json& j, const CandidateScore& c) {
  j = {{"pattern", c.pattern_id},
       {"maturity", to_string(c.maturity)},
       {"G", c.G},
       {"components",
        {{"prior", c.components.prior},
         {"success", c.components.success},
         {"relevance", c.components.relevance},
         {"epistemic", c.components.epistemic}}},
       {"probability", c.probability}};
}

void from_json(const nlohmann::json& j, CandidateScore& c) {
  c.pattern_id = j.at("pattern").get<std::string>();
  auto m = maturity_from_string(j.at("maturity").get<std::string>());
  if (!m) throw Error(ErrorCode::schema, "bad maturity in candidate");
  c.maturity = *m;
  c.G = j.at("G").get<double>();
  const auto& comp = j.at("components");
  c.components.prior = comp.at("prior").get<double>();
  c.components.success = comp.at("success").get<double>();
  c.components.relevance = comp.at("relevance").get<double>();
  c.components.epistemic = comp.at("epistemic").get<double>();
  c.probability = j.at("probability").get<double>();
}

void to_json(nlohmann::json& j, const SelectionRecord& r) {
  j = {{"intent", r.intent},
       {"candidates", r.candidates},
       {"chosen", r.chosen},
       {"tau", r.tau_used},
       {"mode", to_string(r.mode)},
       {"seed", r.rng_seed},
       {"rationale", r.rationale}};
}

void from_json(const nlohmann::json& j, SelectionRecord& r) {
  r.intent = j.at("intent").get<std::string>();
  r.candidates = j.at("candidates").get<std::vector<CandidateScore>>();
  r.chosen = j.at("chosen").get<std::string>();
  r.tau_used = j.at("tau").get<double>();
  auto mode = selection_mode_from_string(j.at("mode").get<std::string>());
  if (!mode) throw Error(ErrorCode::schema, "bad selection mode");
  r.mode = *mode;
  r.rng_seed = j.at("seed").get<std::uint64_t>();
  r.rationale = j.at("rationale").get<std::string>();
}

void to_json(nlohmann::json& j, const UseRecord& r) {
  j = {{"pattern", r.pattern_id},
       {"anchor", r.anchor},
       {"outcome", to_string(r.outcome)},
       {"evidence_note", r.evidence_note},
       {"belief_delta",
        {{"uses", r.belief_delta.uses},
         {"successes", r.belief_delta.successes},
         {"failures", r.belief_delta.failures}}}};
}

void from_json(const nlohmann::json& j, UseRecord& r) {
  r.pattern_id = j.at("pattern").get<std::string>();
  r.anchor = j.at("anchor").get<Seq>();
  auto outcome = outcome_from_string(j.at("outcome").get<std::string>());
  if (!outcome) throw Error(ErrorCode::schema, "bad outcome");
  r.outcome = *outcome;
  r.evidence_note = j.at("evidence_note").get<std::string>();
  const auto& d = j.at("belief_delta");
  r.belief_delta.uses = d.at("uses").get<std::int64_t>();
  r.belief_delta.successes = d.at("successes").get<std::int64_t>();
  r.belief_delta.failures = d.at("failures").get<std::int64_t>();
}

// ---- scoring and selection ------------------------------------------------

double relevance(std::string_view intent, const PatternDocument& doc) {
  const auto a = word_set(intent);
  const auto b = word_set(doc.summary + " " + doc.context);
  std::size_t shared = 0;
  for (const auto& w : a) shared += b.count(w);
  const std::size_t total = a.size() + b.size() - shared;
  // Two empty vocabularies carry no evidence of applicability.
  if (total == 0) return 0.0;
  return static_cast<double>(shared) / static_cast<double>(total);
}

CandidateScore expected_free_energy(const PatternDocument& doc,
                                    const BeliefState& beliefs,
                                    std::string_view intent, SelectionMode mode,
                                    const EngineConfig& config,
                                    const RelevanceScorer& scorer) {
  const MaturityState maturity = classify_maturity(doc);
  const PatternBelief& b = beliefs.at(doc.id);
  const double success_rate =
      (static_cast<double>(b.successes) + 1.0) / (static_cast<double>(b.uses) + 2.0);
  const double rel = scorer(intent, doc);

  CandidateScore score;
  score.pattern_id = doc.id;
  score.maturity = maturity.state;
  score.components.prior = -config.w_prior * std::log(maturity.precision_prior);
  score.components.success = -config.w_success * std::log(success_rate);
  score.components.relevance = -config.w_relevance * rel;
  if (mode == SelectionMode::explore) {
    score.components.epistemic =
        -config.w_epistemic / (1.0 + static_cast<double>(b.uses));
  }
  score.G = score.components.prior + score.components.success +
            score.components.relevance + score.components.epistemic;
  return score;
}

std::vector<CandidateScore> selection_distribution(
    std::span<const CandidateScore> scores, double tau) {
  if (scores.empty()) {
    throw Error(ErrorCode::no_candidates, "no candidate patterns to select from");
  }
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorCode::invalid_argument, "tau must be a positive finite number");
  }
  std::vector<CandidateScore> out(scores.begin(), scores.end());
  double max_logit = -std::numeric_limits<double>::infinity();
  for (const auto& s : out) {
    if (!std::isfinite(s.G)) {
      throw Error(ErrorCode::invalid_argument, "non-finite G for " + s.pattern_id);
    }
    max_logit = std::max(max_logit, -s.G / tau);
  }
  double total = 0.0;
  for (auto& s : out) {
    s.probability = std::exp(-s.G / tau - max_logit);
    total += s.probability;
  }
  for (auto& s : out) s.probability /= total;
  return out;
}

SelectionRecord sample_selection(std::span<const CandidateScore> dist,
                                 std::uint64_t seed, std::string_view intent,
                                 SelectionMode mode, double tau) {
  if (dist.empty()) {
    throw Error(ErrorCode::no_candidates, "no candidate patterns to select from");
  }
  std::size_t pick = 0;
  if (mode == SelectionMode::greedy) {
    for (std::size_t i = 1; i < dist.size(); ++i) {
      if (dist[i].probability > dist[pick].probability) pick = i;
    }
  } else {
    Rng rng(seed);
    const double u = rng.uniform();
    double cumulative = 0.0;
    std::optional<std::size_t> last_positive;
    std::optional<std::size_t> hit;
    for (std::size_t i = 0; i < dist.size(); ++i) {
      if (!(dist[i].probability > 0.0)) continue;
      cumulative += dist[i].probability;
      last_positive = i;
      if (u <= cumulative) {
        hit = i;
        break;
      }
    }
    // Rounding can leave the final cumulative a hair under u.
    pick = hit ? *hit : last_positive.value_or(0);
  }

  SelectionRecord record;
  record.intent = std::string(intent);
  record.candidates.assign(dist.begin(), dist.end());
  record.chosen = dist[pick].pattern_id;
  record.tau_used = tau;
  record.mode = mode;
  record.rng_seed = seed;

  std::ostringstream why;
  why.precision(4);
  why << to_string(mode) << " choice of " << record.chosen << " (p=" << std::fixed
      << dist[pick].probability << ", G=" << dist[pick].G << ") among "
      << dist.size() << " candidate" << (dist.size() == 1 ? "" : "s")
      << " at tau=" << tau;
  record.rationale = why.str();
  return record;
}

SelectionMode explore_trigger(const BeliefState& beliefs, bool explicit_flag,
                              std::int64_t min_samples, const EngineConfig& config) {
  if (explicit_flag) return SelectionMode::explore;
  if (beliefs.tau_observation_count < min_samples) return SelectionMode::explore;
  if (config.literal_tau_trigger && beliefs.tau < static_cast<double>(min_samples)) {
    return SelectionMode::explore;
  }
  return SelectionMode::sampled;
}

bool admits_stubs(SelectionMode mode, bool explicit_flag, const EngineConfig& config) {
  if (explicit_flag) return true;
  return mode == SelectionMode::explore && config.auto_explore_admits_stubs;
}

BeliefState update_beliefs(const BeliefState& beliefs, const TraceEvent& event) {
  BeliefState next = beliefs;
  switch (event.type) {
    case EventType::pattern_read:
    case EventType::pattern_update:
    case EventType::pattern_implement: {
      PatternBelief& b = belief_for(next, event.payload.at("pattern").get<std::string>());
      b.evidence_events += 1;
      b.last_updated = event.seq;
      break;
    }
    case EventType::pur: {
      const UseRecord use = event.payload.get<UseRecord>();
      PatternBelief& b = belief_for(next, use.pattern_id);
      const BeliefDelta d = delta_for(use.outcome);
      if (use.belief_delta != d) {
        throw Error(ErrorCode::invalid_argument,
                    "pur belief_delta disagrees with outcome " +
                        std::string(to_string(use.outcome)));
      }
      b.uses += d.uses;
      b.successes += d.successes;
      b.failures += d.failures;
      b.last_updated = event.seq;
      break;
    }
    default:
      break;
  }
  return next;
}

double score_spread(std::span<const CandidateScore> scores, double epsilon) {
  if (scores.size() < 2) return 0.0;
  double mean = 0.0;
  for (const auto& s : scores) mean += s.G;
  mean /= static_cast<double>(scores.size());
  double var = 0.0;
  for (const auto& s : scores) var += (s.G - mean) * (s.G - mean);
  var /= static_cast<double>(scores.size());
  return std::sqrt(var) / (std::abs(mean) + epsilon);
}

BeliefState update_tau(const BeliefState& beliefs, const TauObservation& obs,
                       const EngineConfig& config) {
  BeliefState next = beliefs;
  const double length = std::max(0.0, obs.text_length);
  if (!next.len_baseline) next.len_baseline = length;
  const double baseline = *next.len_baseline;
  const double error = std::abs(length - baseline) / std::max(baseline, 1.0);
  next.error_ewma = (1.0 - config.lambda) * next.error_ewma + config.lambda * error;
  const double spread = std::max(0.0, obs.spread);
  const double raw =
      config.tau0 * (1.0 + config.alpha * next.error_ewma) / (1.0 + config.beta * spread);
  next.tau = std::clamp(raw, config.tau_min, config.tau_max);
  next.tau_observation_count += 1;
  return next;
}

std::vector<CandidateScore> score_library(const PatternLibrary& library,
                                          const BeliefState& beliefs,
                                          std::string_view intent,
                                          SelectionMode mode, bool include_stubs,
                                          const EngineConfig& config,
                                          const RelevanceScorer& scorer) {
  std::vector<CandidateScore> scores;
  for (const auto& [id, doc] : library.patterns) {
    if (!include_stubs && classify_maturity(doc).state == Maturity::stub) continue;
    scores.push_back(expected_free_energy(doc, beliefs, intent, mode, config, scorer));
  }
  return scores;
}

SelectionRecord select_pattern(const PatternLibrary& library,
                               const BeliefState& beliefs,
                               const SelectRequest& request,
                               const EngineConfig& config,
                               const RelevanceScorer& scorer) {
  SelectionMode mode =
      explore_trigger(beliefs, request.explore_flag, config.min_samples, config);
  const bool stubs = admits_stubs(mode, request.explore_flag, config);
  if (request.greedy && !request.explore_flag) mode = SelectionMode::greedy;
  const auto scores =
      score_library(library, beliefs, request.intent, mode, stubs, config, scorer);
  const double tau = request.tau_override.value_or(beliefs.tau);
  const auto dist = selection_distribution(scores, tau);
  return sample_selection(dist, request.seed, request.intent, mode, tau);
}

}  // namespace futon
