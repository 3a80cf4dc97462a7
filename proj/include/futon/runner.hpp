#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "futon/engine.hpp"
#include "futon/parser.hpp"
#include "futon/trace.hpp"

namespace futon {

enum class RosterVerb { pattern_select, pattern_use, musn_plan };

const char* to_string(RosterVerb verb);
std::optional<RosterVerb> roster_verb_from_string(std::string_view s);

// A tool-roster signal emitted by an agent. pattern-select and pattern-use
// name a target pattern; musn-plan must not.
struct RosterSignal {
  RosterVerb verb = RosterVerb::musn_plan;
  std::optional<PatternId> target;
  std::string note;
};

// Throws Error(invalid_argument) when the target rule is violated.
void validate(const RosterSignal& signal);

// Help text handed to agents at session start.
std::string roster_help();

inline constexpr int kAdapterSchemaVersion = 1;

// Maps one agent's line-delimited JSON stream onto trace events. Input lines
// are untrusted: anything unusable is recorded as an observation carrying a
// warning and processing continues.
class AgentRunner {
 public:
  AgentRunner(Session& session, const PatternLibrary& library,
              const RelevanceScorer& scorer = relevance);

  void consume_line(std::string_view line);
  // Closes a pending turn and ends the session.
  void finish();

  std::int64_t lines() const { return lines_; }
  std::int64_t warnings() const { return warnings_; }
  std::int64_t signals() const { return signals_; }

 private:
  void warn(std::string_view warning, std::string_view detail, std::string_view raw);
  void handle_signal(const nlohmann::json& record, std::string_view raw);
  std::optional<PatternId> resolve_target(const nlohmann::json& record);
  Seq record_selection(const PatternId& target, const std::string& note, bool inferred);
  void record_use(const PatternId& target, Outcome outcome, const std::string& note);
  void end_turn();

  Session& session_;
  const PatternLibrary& library_;
  RelevanceScorer scorer_;
  std::string intent_;
  std::map<PatternId, Seq> turn_selects_;
  double turn_text_length_ = 0.0;
  bool turn_open_ = false;
  std::int64_t lines_ = 0;
  std::int64_t warnings_ = 0;
  std::int64_t signals_ = 0;
};

struct RunSummary {
  SessionState state;
  std::int64_t lines = 0;
  std::int64_t warnings = 0;
  std::int64_t signals = 0;
};

// Feeds every line of `input` through an AgentRunner and finishes the
// session. The session must be open.
RunSummary run_stream(std::istream& input, Session& session, const PatternLibrary& library,
                      const RelevanceScorer& scorer = relevance);

struct SelectOutcome {
  SelectionRecord record;
  Seq psr_seq = -1;
  Seq select_seq = -1;
};

// Engine-driven selection: scores, samples and appends intent, psr and
// pattern-select events.
SelectOutcome run_select(Session& session, const PatternLibrary& library,
                         const SelectRequest& request,
                         const RelevanceScorer& scorer = relevance);

// Candidate table plus choice, as printed by `futon select`.
std::string format_selection(const SelectionRecord& record);

struct TurnSummary {
  std::int64_t index = 0;
  std::vector<SelectionRecord> selections;
  std::vector<UseRecord> uses;
};

struct SessionReport {
  SessionState state;
  std::vector<TurnSummary> turns;
  std::int64_t events = 0;
};

// Built purely by replaying the events.
SessionReport build_report(std::span<const TraceEvent> events);
std::string format_report(const SessionReport& report);
nlohmann::json report_to_json(const SessionReport& report);

}  // namespace futon
