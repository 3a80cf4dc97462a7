#include "futon/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "futon/error.hpp"

namespace futon {

namespace {

constexpr std::size_t kMaxRawEcho = 1024;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string text_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) return {};
  return it->get<std::string>();
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

const char* to_string(RosterVerb verb) {
  switch (verb) {
    case RosterVerb::pattern_select:
      return "pattern-select";
    case RosterVerb::pattern_use:
      return "pattern-use";
    case RosterVerb::musn_plan:
      return "musn-plan";
  }
  return "musn-plan";
}

std::optional<RosterVerb> roster_verb_from_string(std::string_view s) {
  if (s == "pattern-select") return RosterVerb::pattern_select;
  if (s == "pattern-use") return RosterVerb::pattern_use;
  if (s == "musn-plan") return RosterVerb::musn_plan;
  return std::nullopt;
}

void validate(const RosterSignal& signal) {
  const bool has_target = signal.target.has_value() && !signal.target->empty();
  if (signal.verb == RosterVerb::musn_plan && has_target) {
    throw Error(ErrorCode::invalid_argument, "musn-plan does not take a target pattern");
  }
  if (signal.verb != RosterVerb::musn_plan && !has_target) {
    throw Error(ErrorCode::invalid_argument,
                std::string(to_string(signal.verb)) + " requires a target pattern");
  }
}

std::string roster_help() {
  return "Tool roster (you should emit these signals when you do the corresponding action)\n"
         "- pattern-select library/<pattern>    <state why you want to read it>\n"
         "- pattern-use    library/<pattern>    <state where you will apply it>\n"
         "- musn-plan      <outline your plan>\n"
         "- wide-search    ; an alias for rg\n";
}

// ---- AgentRunner ------------------------------------------------------------

AgentRunner::AgentRunner(Session& session, const PatternLibrary& library,
                         const RelevanceScorer& scorer)
    : session_(session), library_(library), scorer_(scorer) {}

void AgentRunner::warn(std::string_view warning, std::string_view detail,
                       std::string_view raw) {
  ++warnings_;
  std::string echo(raw.substr(0, kMaxRawEcho));
  session_.append(EventType::observation, {{"source", "runner"},
                                           {"warning", warning},
                                           {"detail", detail},
                                           {"raw", echo}});
}

void AgentRunner::consume_line(std::string_view raw) {
  const std::string_view line = trim(raw);
  if (line.empty()) return;
  ++lines_;
  turn_open_ = true;

  nlohmann::json record;
  try {
    record = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& ex) {
    warn("malformed input line", ex.what(), line);
    return;
  }
  if (!record.is_object()) {
    warn("malformed input line", "expected a JSON object", line);
    return;
  }

  std::string kind = text_field(record, "kind");
  if (kind.empty() && record.contains("verb")) kind = "signal";

  if (kind == "signal") {
    handle_signal(record, line);
  } else if (kind == "output") {
    const std::string text = text_field(record, "text");
    turn_text_length_ += static_cast<double>(text.size());
    session_.append(EventType::observation,
                    {{"source", "agent-output"},
                     {"text_length", text.size()},
                     {"text", text}});
  } else if (kind == "turn-end") {
    end_turn();
  } else if (kind == "intent") {
    intent_ = text_field(record, "text");
    session_.append(EventType::intent, {{"text", intent_}});
  } else if (kind == "tool-call") {
    session_.append(EventType::tool_call,
                    {{"name", text_field(record, "name")},
                     {"args", record.value("args", nlohmann::json())}});
  } else {
    warn("unknown record kind", kind.empty() ? "missing kind" : kind, line);
  }
}

std::optional<PatternId> AgentRunner::resolve_target(const nlohmann::json& record) {
  std::string target = text_field(record, "target");
  if (target.empty()) return std::nullopt;
  const auto& known = session_.state().beliefs.patterns;
  if (known.count(target) != 0) return target;
  // Agents address patterns as library/<pattern>.
  constexpr std::string_view prefix = "library/";
  if (target.rfind(prefix, 0) == 0) {
    std::string stripped = target.substr(prefix.size());
    if (known.count(stripped) != 0) return stripped;
  }
  return std::nullopt;
}

void AgentRunner::handle_signal(const nlohmann::json& record, std::string_view raw) {
  const std::string verb = text_field(record, "verb");
  const std::string note = text_field(record, "note");
  const std::string target_text = text_field(record, "target");

  if (verb == "wide-search") {
    session_.append(EventType::tool_call, {{"name", "wide-search"}, {"args", note}});
    return;
  }
  if (auto rv = roster_verb_from_string(verb)) {
    RosterSignal signal{*rv, target_text.empty() ? std::nullopt
                                                 : std::optional<PatternId>(target_text),
                        note};
    try {
      validate(signal);
    } catch (const Error& e) {
      warn("invalid roster signal", e.what(), raw);
      return;
    }
    if (*rv == RosterVerb::musn_plan) {
      ++signals_;
      session_.append(EventType::musn_plan, {{"note", note}});
      return;
    }
    auto target = resolve_target(record);
    if (!target) {
      warn("unknown pattern", target_text, raw);
      return;
    }
    ++signals_;
    if (*rv == RosterVerb::pattern_select) {
      record_selection(*target, note, false);
    } else {
      Outcome outcome = Outcome::unknown;
      const std::string outcome_text = text_field(record, "outcome");
      if (!outcome_text.empty()) {
        if (auto o = outcome_from_string(outcome_text)) {
          outcome = *o;
        } else {
          warn("unknown outcome treated as unknown", outcome_text, raw);
        }
      }
      record_use(*target, outcome, note);
    }
    return;
  }
  if (verb == "pattern-update" || verb == "pattern-implement") {
    auto target = resolve_target(record);
    if (!target) {
      warn("unknown pattern", target_text, raw);
      return;
    }
    ++signals_;
    session_.append(verb == "pattern-update" ? EventType::pattern_update
                                             : EventType::pattern_implement,
                    {{"pattern", *target}, {"note", note}});
    return;
  }
  warn("unknown roster verb", verb, raw);
}

Seq AgentRunner::record_selection(const PatternId& target, const std::string& note,
                                  bool inferred) {
  const SessionState& state = session_.state();
  const EngineConfig& config = state.config;
  const SelectionMode mode =
      explore_trigger(state.beliefs, false, config.min_samples, config);
  auto scores = score_library(library_, state.beliefs, intent_, mode,
                              admits_stubs(mode, false, config), config, scorer_);
  const bool listed = std::any_of(scores.begin(), scores.end(), [&](const CandidateScore& s) {
    return s.pattern_id == target;
  });
  if (!listed) {
    // The agent may pick a pattern the engine would not offer (a stub, or one
    // added to the library after the trace started).
    if (const PatternDocument* doc = library_.find(target)) {
      scores.push_back(expected_free_energy(*doc, state.beliefs, intent_, mode, config, scorer_));
    } else {
      CandidateScore bare;
      bare.pattern_id = target;
      bare.maturity = state.maturity.at(target);
      scores.push_back(bare);
    }
  }
  const auto dist = selection_distribution(scores, state.beliefs.tau);

  SelectionRecord record;
  record.intent = intent_;
  record.candidates = dist;
  record.chosen = target;
  record.tau_used = state.beliefs.tau;
  record.mode = mode;
  record.rng_seed = 0;
  record.rationale = std::string(inferred ? "inferred from pattern-use" : "agent signal") +
                     (note.empty() ? "" : ": " + note);

  const Seq psr_seq = session_.append(EventType::psr, record).seq;
  const Seq select_seq =
      session_
          .append(EventType::pattern_select,
                  {{"pattern", target}, {"note", note}, {"psr", psr_seq}, {"inferred", inferred}})
          .seq;
  session_.append(EventType::pattern_read, {{"pattern", target}, {"note", note}});
  turn_selects_[target] = select_seq;
  return select_seq;
}

void AgentRunner::record_use(const PatternId& target, Outcome outcome,
                             const std::string& note) {
  Seq anchor;
  if (auto it = turn_selects_.find(target); it != turn_selects_.end()) {
    anchor = it->second;
  } else {
    anchor = record_selection(target, note, true);
  }
  session_.append(EventType::pattern_use, {{"pattern", target}, {"note", note}});
  UseRecord use{target, anchor, outcome, note, delta_for(outcome)};
  session_.append(EventType::pur, use);
}

void AgentRunner::end_turn() {
  const SessionState& state = session_.state();
  session_.append(EventType::turn_boundary, {{"turn", state.turns}});
  const TauObservation obs{turn_text_length_, session_.state().last_spread};
  session_.append(EventType::belief_update,
                  make_belief_update_payload(session_.state(), obs));
  turn_text_length_ = 0.0;
  turn_selects_.clear();
  turn_open_ = false;
}

void AgentRunner::finish() {
  if (turn_open_) end_turn();
  session_.close();
}

RunSummary run_stream(std::istream& input, Session& session, const PatternLibrary& library,
                      const RelevanceScorer& scorer) {
  AgentRunner runner(session, library, scorer);
  std::string line;
  while (std::getline(input, line)) runner.consume_line(line);
  runner.finish();
  return {session.state(), runner.lines(), runner.warnings(), runner.signals()};
}

// ---- select -------------------------------------------------------------------

SelectOutcome run_select(Session& session, const PatternLibrary& library,
                         const SelectRequest& request, const RelevanceScorer& scorer) {
  const SessionState& state = session.state();
  SelectionRecord record =
      select_pattern(library, state.beliefs, request, state.config, scorer);
  session.append(EventType::intent, {{"text", request.intent}});
  SelectOutcome out;
  out.psr_seq = session.append(EventType::psr, record).seq;
  out.select_seq = session
                       .append(EventType::pattern_select, {{"pattern", record.chosen},
                                                           {"note", record.rationale},
                                                           {"psr", out.psr_seq},
                                                           {"inferred", false}})
                       .seq;
  out.record = std::move(record);
  return out;
}

std::string format_selection(const SelectionRecord& record) {
  std::size_t width = 7;
  for (const auto& c : record.candidates) width = std::max(width, c.pattern_id.size());
  std::ostringstream out;
  out << "intent: " << record.intent << '\n';
  out << "mode: " << to_string(record.mode) << "  tau: " << fixed(record.tau_used, 4)
      << "  seed: " << record.rng_seed << '\n';
  out << pad("pattern", width + 2) << pad("maturity", 12) << pad("G", 10) << "p\n";
  for (const auto& c : record.candidates) {
    out << pad(c.pattern_id, width + 2) << pad(to_string(c.maturity), 12)
        << pad(fixed(c.G, 4), 10) << fixed(c.probability, 4)
        << (c.pattern_id == record.chosen ? "  <- chosen" : "") << '\n';
  }
  out << "chosen: " << record.chosen << '\n';
  out << "rationale: " << record.rationale << '\n';
  return out.str();
}

// ---- report -------------------------------------------------------------------

SessionReport build_report(std::span<const TraceEvent> events) {
  SessionReport report;
  report.state = replay(events);
  report.events = static_cast<std::int64_t>(events.size());
  TurnSummary current;
  for (const auto& e : events) {
    if (e.type == EventType::psr) {
      current.selections.push_back(e.payload.get<SelectionRecord>());
    } else if (e.type == EventType::pur) {
      current.uses.push_back(e.payload.get<UseRecord>());
    } else if (e.type == EventType::turn_boundary) {
      report.turns.push_back(std::move(current));
      current = TurnSummary{};
      current.index = static_cast<std::int64_t>(report.turns.size());
    }
  }
  if (!current.selections.empty() || !current.uses.empty()) {
    report.turns.push_back(std::move(current));
  }
  return report;
}

std::string format_report(const SessionReport& report) {
  const SessionState& s = report.state;
  std::size_t width = 7;
  for (const auto& [id, _] : s.beliefs.patterns) width = std::max(width, id.size());
  std::ostringstream out;
  out << "session: " << s.session_id << "  events: " << report.events
      << "  turns: " << s.turns << (s.ended ? "  (ended)" : "") << '\n';
  out << pad("pattern", width + 2) << pad("maturity", 12) << pad("uses", 7)
      << pad("succ", 7) << pad("fail", 7) << "evidence\n";
  for (const auto& [id, b] : s.beliefs.patterns) {
    auto m = s.maturity.find(id);
    out << pad(id, width + 2)
        << pad(m == s.maturity.end() ? "?" : to_string(m->second), 12)
        << pad(std::to_string(b.uses), 7) << pad(std::to_string(b.successes), 7)
        << pad(std::to_string(b.failures), 7) << b.evidence_events << '\n';
  }
  for (const auto& turn : report.turns) {
    out << "turn " << turn.index << ":\n";
    for (const auto& sel : turn.selections) {
      const CandidateScore* c = sel.find(sel.chosen);
      out << "  PSR " << sel.chosen << " (" << to_string(sel.mode)
          << ", p=" << fixed(c ? c->probability : 0.0, 4) << ")\n";
    }
    for (const auto& use : turn.uses) {
      out << "  PUR " << use.pattern_id << " -> " << to_string(use.outcome)
          << " (anchor " << use.anchor << ")\n";
    }
  }
  out << "tau: " << fixed(s.beliefs.tau, 4) << "  error_ewma: " << fixed(s.beliefs.error_ewma, 4)
      << "  tau observations: " << s.beliefs.tau_observation_count << '\n';
  return out.str();
}

nlohmann::json report_to_json(const SessionReport& report) {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& t : report.turns) {
    turns.push_back({{"index", t.index}, {"psr", t.selections}, {"pur", t.uses}});
  }
  nlohmann::json maturity = nlohmann::json::object();
  for (const auto& [id, m] : report.state.maturity) maturity[id] = to_string(m);
  return {{"session", report.state.session_id},
          {"events", report.events},
          {"turns", turns},
          {"beliefs", report.state.beliefs},
          {"maturity", maturity},
          {"ended", report.state.ended}};
}

}  // namespace futon
