#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "futon/engine.hpp"
#include "futon/event.hpp"
#include "futon/parser.hpp"

namespace futon {

inline constexpr int kTraceSchemaVersion = 1;
inline constexpr std::string_view kTraceExtension = ".jsonl";

// Produces the informational timestamp for each event. Ordering authority is
// always seq.
using Clock = std::function<std::string()>;

std::string utc_now();
// Deterministic clock: start + n milliseconds on the n-th call.
Clock synthetic_clock(std::int64_t start_unix_ms = 0);

bool is_valid_session_id(std::string_view id);
std::filesystem::path trace_path(const std::filesystem::path& dir,
                                 const std::string& session_id);

std::string event_to_line(const TraceEvent& event);
TraceEvent event_from_json(const nlohmann::json& j);

struct TraceOptions {
  Clock clock = utc_now;
  bool fsync = false;
};

// Append-only writer for one session trace. Each event is one line written
// with a single write(2) on an O_APPEND descriptor.
class TraceWriter {
 public:
  // Starts a new trace with a session-start event. Throws Error(io) if a
  // trace for the session already exists.
  static TraceWriter create(const std::filesystem::path& dir,
                            const std::string& session_id,
                            nlohmann::json start_payload, TraceOptions options = {});
  // Reopens an existing trace and appends a session-resume event. Throws
  // Error(not_found) for an unknown session.
  static TraceWriter resume(const std::filesystem::path& dir,
                            const std::string& session_id,
                            nlohmann::json resume_payload,
                            TraceOptions options = {});

  TraceWriter(TraceWriter&& other) noexcept;
  TraceWriter& operator=(TraceWriter&& other) noexcept;
  TraceWriter(const TraceWriter&) = delete;
  TraceWriter& operator=(const TraceWriter&) = delete;
  ~TraceWriter();

  // Persists the event with the next seq and returns it. Throws Error(closed)
  // after close(), Error(io) on write failure (the seq is not consumed).
  TraceEvent append(EventType type, nlohmann::json payload);
  // Appends session-end and releases the file.
  void close();

  bool is_open() const { return fd_ >= 0; }
  Seq next_seq() const { return next_seq_; }
  const std::string& session_id() const { return session_id_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  TraceWriter(int fd, std::string session_id, std::filesystem::path path,
              Seq next_seq, TraceOptions options);

  int fd_ = -1;
  std::string session_id_;
  std::filesystem::path path_;
  Seq next_seq_ = 0;
  TraceOptions options_;
};

// Reads and validates a whole trace: well-formed lines, contiguous seq from
// 0, session-start first, supported schema version. Throws TraceCorrupt
// naming the last good seq, Error(not_found) if the file is missing.
std::vector<TraceEvent> read_trace(const std::filesystem::path& path);

// Looks the seq up in this session's own events only.
const TraceEvent& resolve_anchor(std::span<const TraceEvent> events, Seq seq);

struct PatternEntry {
  PatternId id;
  Maturity maturity = Maturity::stub;
};

nlohmann::json make_start_payload(const EngineConfig& config,
                                  std::span<const PatternEntry> patterns);
std::vector<PatternEntry> library_entries(const PatternLibrary& library);

// Everything replay reconstructs from a trace.
struct SessionState {
  std::string session_id;
  EngineConfig config;
  BeliefState beliefs;
  std::map<PatternId, Maturity> maturity;
  std::optional<SelectionRecord> last_selection;
  double last_spread = 0.0;
  Seq last_seq = -1;
  std::int64_t turns = 0;
  bool ended = false;
};

// One step of the replay fold. Live sessions apply the same function to each
// event they append. Throws Error on inconsistent events.
void fold_event(SessionState& state, const TraceEvent& event);

// Payload for a belief-update event: the tau observation plus a snapshot of
// the state after applying it. Replay re-derives and checks the snapshot.
nlohmann::json make_belief_update_payload(const SessionState& state,
                                          const TauObservation& obs);

SessionState replay(std::span<const TraceEvent> events);
SessionState replay(const std::filesystem::path& path);

// Exclusive advisory lock on <dir>/<session>.lock, released on destruction
// or process exit. Throws Error(busy) if another process holds it.
class SessionLock {
 public:
  SessionLock(const std::filesystem::path& dir, const std::string& session_id);
  SessionLock(SessionLock&& other) noexcept;
  SessionLock& operator=(SessionLock&&) = delete;
  SessionLock(const SessionLock&) = delete;
  SessionLock& operator=(const SessionLock&) = delete;
  ~SessionLock();

 private:
  int fd_ = -1;
};

enum class OpenMode { create, resume, create_or_resume };

// A writable session: trace writer plus the live state folded from every
// appended event.
class Session {
 public:
  // On resume the engine config stored in the trace wins over `config`, and
  // library patterns the trace does not know yet are registered in the
  // session-resume event.
  static Session open(const std::filesystem::path& dir, const std::string& session_id,
                      const PatternLibrary& library, const EngineConfig& config,
                      OpenMode mode, TraceOptions options = {}, bool lock = true);

  TraceEvent append(EventType type, nlohmann::json payload);
  void close();

  const SessionState& state() const { return state_; }
  const TraceWriter& writer() const { return writer_; }
  bool resumed() const { return resumed_; }

 private:
  Session(std::optional<SessionLock> lock, TraceWriter writer, SessionState state,
          bool resumed);

  std::optional<SessionLock> lock_;
  TraceWriter writer_;
  SessionState state_;
  bool resumed_ = false;
};

}  // namespace futon
