#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace futon {

using Seq = std::int64_t;

enum class EventType {
  session_start,
  session_resume,
  intent,
  psr,
  pattern_select,
  pattern_read,
  pattern_use,
  pattern_update,
  pattern_implement,
  musn_plan,
  tool_call,
  observation,
  pur,
  belief_update,
  turn_boundary,
  session_end,
};

// Wire names use dashes: "session-start", "pattern-select", ...
const char* to_string(EventType type);
std::optional<EventType> event_type_from_string(std::string_view name);

// One line of a session trace.
struct TraceEvent {
  Seq seq = 0;
  std::string ts;
  std::string session;
  EventType type = EventType::observation;
  nlohmann::json payload = nlohmann::json::object();
};

}  // namespace futon
