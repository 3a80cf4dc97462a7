#include "futon/sim.hpp"

#include <algorithm>
#include <cmath>

#include "futon/error.hpp"
#include "futon/rng.hpp"
#include "futon/runner.hpp"

namespace futon {

namespace {

double parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    double v = std::stod(value, &used);
    if (used == value.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::invalid_argument, "sim config '" + key + "': not a number: " + value);
}

// Stream ids for derive_seed.
constexpr std::uint64_t kOutcomeStream = 0x6f7574636f6d65ULL;
constexpr std::uint64_t kSelectionStream = 0x73656c656374ULL;

}  // namespace

void validate(const SimConfig& c) {
  if (c.turns < 0) throw Error(ErrorCode::invalid_argument, "turns must be non-negative");
  if (c.window <= 0) throw Error(ErrorCode::invalid_argument, "window must be positive");
  if (c.trace_dir.empty()) throw Error(ErrorCode::invalid_argument, "trace_dir is required");
  for (const auto& [id, p] : c.true_success) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::invalid_argument,
                  "true success for '" + id + "' must lie in [0, 1]");
    }
    if (c.library.find(id) == nullptr) {
      throw Error(ErrorCode::invalid_argument, "true success names unknown pattern '" + id + "'");
    }
  }
}

SimConfig parse_sim_config(std::string_view text, const std::filesystem::path& base_dir) {
  SimConfig c;
  std::map<std::string, double> success;
  std::filesystem::path library_root;
  for (const auto& [key, value] : parse_key_values(text)) {
    auto resolve = [&](const std::string& v) {
      std::filesystem::path p(v);
      return p.is_absolute() ? p : base_dir / p;
    };
    if (key == "library") {
      library_root = resolve(value);
    } else if (key == "turns") {
      c.turns = static_cast<std::int64_t>(parse_number(key, value));
    } else if (key == "seed") {
      c.seed = static_cast<std::uint64_t>(std::stoull(value));
    } else if (key == "intent") {
      c.intent = value;
    } else if (key == "explore") {
      c.explore_flag = value == "true" || value == "1" || value == "yes";
    } else if (key == "window") {
      c.window = static_cast<std::int64_t>(parse_number(key, value));
    } else if (key == "trace_dir") {
      c.trace_dir = resolve(value);
    } else if (key == "session") {
      c.session_id = value;
    } else if (key.rfind("success.", 0) == 0) {
      success[key.substr(8)] = parse_number(key, value);
    } else if (key == "length.success_mean") {
      c.lengths.success_mean = parse_number(key, value);
    } else if (key == "length.success_sd") {
      c.lengths.success_sd = parse_number(key, value);
    } else if (key == "length.failure_mean") {
      c.lengths.failure_mean = parse_number(key, value);
    } else if (key == "length.failure_sd") {
      c.lengths.failure_sd = parse_number(key, value);
    } else {
      set_config_value(c.engine, key, value);
    }
  }
  if (library_root.empty()) {
    throw Error(ErrorCode::invalid_argument, "sim config needs a 'library' key");
  }
  c.library = load_library(library_root);
  c.true_success = std::move(success);
  return c;
}

SimReport run_simulation(const SimConfig& config) {
  validate(config);
  const std::string session_id =
      config.session_id.empty() ? "sim-" + std::to_string(config.seed) : config.session_id;

  TraceOptions options;
  options.clock = synthetic_clock();
  Session session = Session::open(config.trace_dir, session_id, config.library, config.engine,
                                  OpenMode::create, options);

  Rng outcomes(derive_seed(config.seed, kOutcomeStream));
  SimReport report;
  report.seed = config.seed;
  report.turns = config.turns;
  report.window = config.window;

  if (config.turns > 0) {
    session.append(EventType::intent, {{"text", config.intent}});
  }
  for (std::int64_t turn = 0; turn < config.turns; ++turn) {
    SelectRequest request;
    request.intent = config.intent;
    request.seed = derive_seed(derive_seed(config.seed, kSelectionStream),
                               static_cast<std::uint64_t>(turn));
    request.explore_flag = config.explore_flag;
    const SelectionRecord record = select_pattern(config.library, session.state().beliefs,
                                                  request, session.state().config);
    const PatternId& chosen = record.chosen;
    report.selections.push_back(chosen);
    report.modes.push_back(record.mode);

    const Seq psr_seq = session.append(EventType::psr, record).seq;
    const Seq select_seq = session
                               .append(EventType::pattern_select, {{"pattern", chosen},
                                                                   {"note", record.rationale},
                                                                   {"psr", psr_seq},
                                                                   {"inferred", false}})
                               .seq;
    session.append(EventType::pattern_read, {{"pattern", chosen}, {"note", "simulated read"}});

    auto truth = config.true_success.find(chosen);
    const double p_success = truth == config.true_success.end() ? 0.5 : truth->second;
    const bool success = outcomes.bernoulli(p_success);
    const LengthModel& lm = config.lengths;
    const double length = std::max(
        0.0, std::round(success ? outcomes.normal(lm.success_mean, lm.success_sd)
                                : outcomes.normal(lm.failure_mean, lm.failure_sd)));
    session.append(EventType::observation,
                   {{"source", "simulator"}, {"text_length", length}});
    session.append(EventType::pattern_use, {{"pattern", chosen}, {"note", "simulated use"}});
    const Outcome outcome = success ? Outcome::success : Outcome::failure;
    UseRecord use{chosen, select_seq, outcome, "simulated outcome", delta_for(outcome)};
    session.append(EventType::pur, use);

    session.append(EventType::turn_boundary, {{"turn", turn}});
    const TauObservation obs{length, session.state().last_spread};
    session.append(EventType::belief_update, make_belief_update_payload(session.state(), obs));
  }
  session.close();

  for (std::int64_t start = 0; start < config.turns; start += config.window) {
    const std::int64_t end = std::min(config.turns, start + config.window);
    std::map<PatternId, double> freq;
    for (const auto& [id, _] : config.library.patterns) freq[id] = 0.0;
    for (std::int64_t t = start; t < end; ++t) {
      freq[report.selections[static_cast<std::size_t>(t)]] += 1.0;
    }
    for (auto& [id, f] : freq) f /= static_cast<double>(end - start);
    report.window_frequencies.push_back(std::move(freq));
  }
  report.final_state = session.state();
  report.trace_file = session.writer().path();
  return report;
}

bool compare_replay(const SimReport& report) {
  try {
    const SessionState replayed = replay(report.trace_file);
    return replayed.beliefs == report.final_state.beliefs;
  } catch (const std::exception&) {
    return false;
  }
}

nlohmann::json sim_report_to_json(const SimReport& report) {
  nlohmann::json windows = nlohmann::json::array();
  for (std::size_t i = 0; i < report.window_frequencies.size(); ++i) {
    windows.push_back({{"start", static_cast<std::int64_t>(i) * report.window},
                       {"frequencies", report.window_frequencies[i]}});
  }
  std::map<PatternId, std::int64_t> totals;
  for (const auto& id : report.selections) totals[id] += 1;
  return {{"seed", report.seed},
          {"turns", report.turns},
          {"window", report.window},
          {"selection_totals", totals},
          {"windows", windows},
          {"final_beliefs", report.final_state.beliefs},
          {"trace", report.trace_file.string()}};
}

}  // namespace futon
