#include "futon/trace.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <memory>
#include <sstream>

#include "futon/error.hpp"

namespace futon {

namespace {

constexpr const char* kEventNames[] = {
    "session-start",  "session-resume",  "intent",         "psr",
    "pattern-select", "pattern-read",    "pattern-use",    "pattern-update",
    "pattern-implement", "musn-plan",    "tool-call",      "observation",
    "pur",            "belief-update",   "turn-boundary",  "session-end",
};

std::string format_utc(std::int64_t unix_ms) {
  const std::time_t secs = static_cast<std::time_t>(unix_ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(unix_ms % 1000));
  return out;
}

std::string errno_text() { return std::strerror(errno); }

void write_all(int fd, const std::string& data, const std::filesystem::path& path) {
  std::size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::io, "write to " + path.string() + " failed: " + errno_text());
    }
    done += static_cast<std::size_t>(n);
  }
}

int open_append(const std::filesystem::path& path, bool exclusive) {
  int flags = O_WRONLY | O_APPEND | O_CLOEXEC;
  if (exclusive) flags |= O_CREAT | O_EXCL;
  int fd = ::open(path.c_str(), flags, 0644);
  if (fd < 0) {
    if (exclusive && errno == EEXIST) {
      throw Error(ErrorCode::io, "trace already exists: " + path.string());
    }
    if (!exclusive && errno == ENOENT) {
      throw Error(ErrorCode::not_found, "no trace at " + path.string());
    }
    throw Error(ErrorCode::io, "cannot open " + path.string() + ": " + errno_text());
  }
  return fd;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create " + dir.string() + ": " + ec.message());
}

void check_session_id(const std::string& id) {
  if (!is_valid_session_id(id)) {
    throw Error(ErrorCode::invalid_argument, "invalid session id '" + id + "'");
  }
}

nlohmann::json belief_snapshot(const BeliefState& b) {
  nlohmann::json patterns = nlohmann::json::object();
  for (const auto& [id, p] : b.patterns) {
    patterns[id] = {{"uses", p.uses},
                    {"successes", p.successes},
                    {"failures", p.failures},
                    {"evidence_events", p.evidence_events}};
  }
  return {{"tau", b.tau},
          {"error_ewma", b.error_ewma},
          {"tau_observation_count", b.tau_observation_count},
          {"patterns", patterns}};
}

void register_patterns(SessionState& state, const nlohmann::json& list) {
  for (const auto& entry : list) {
    const auto id = entry.at("id").get<std::string>();
    auto m = maturity_from_string(entry.at("maturity").get<std::string>());
    if (!m) throw Error(ErrorCode::schema, "bad maturity for pattern " + id);
    state.maturity[id] = *m;
    state.beliefs.patterns.try_emplace(id);
  }
}

}  // namespace

const char* to_string(EventType type) {
  return kEventNames[static_cast<int>(type)];
}

std::optional<EventType> event_type_from_string(std::string_view name) {
  for (int i = 0; i < static_cast<int>(std::size(kEventNames)); ++i) {
    if (name == kEventNames[i]) return static_cast<EventType>(i);
  }
  return std::nullopt;
}

std::string utc_now() {
  using namespace std::chrono;
  const auto ms =
      duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
  return format_utc(ms);
}

Clock synthetic_clock(std::int64_t start_unix_ms) {
  auto tick = std::make_shared<std::int64_t>(start_unix_ms);
  return [tick]() { return format_utc((*tick)++); };
}

bool is_valid_session_id(std::string_view id) {
  if (id.empty() || id.size() > 200 || id.front() == '.') return false;
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
                    c == '_' || c == '.';
    if (!ok) return false;
  }
  return true;
}

std::filesystem::path trace_path(const std::filesystem::path& dir,
                                 const std::string& session_id) {
  return dir / (session_id + std::string(kTraceExtension));
}

std::string event_to_line(const TraceEvent& e) {
  nlohmann::ordered_json j;
  j["seq"] = e.seq;
  j["ts"] = e.ts;
  j["session"] = e.session;
  j["type"] = to_string(e.type);
  j["payload"] = e.payload;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

TraceEvent event_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::schema, "event is not an object");
  TraceEvent e;
  const auto& seq = j.at("seq");
  if (!seq.is_number_integer()) throw Error(ErrorCode::schema, "seq is not an integer");
  e.seq = seq.get<Seq>();
  e.ts = j.at("ts").get<std::string>();
  e.session = j.at("session").get<std::string>();
  auto type = event_type_from_string(j.at("type").get<std::string>());
  if (!type) throw Error(ErrorCode::schema, "unknown event type");
  e.type = *type;
  e.payload = j.at("payload");
  if (!e.payload.is_object()) throw Error(ErrorCode::schema, "payload is not an object");
  return e;
}

// ---- TraceWriter ------------------------------------------------------------

TraceWriter::TraceWriter(int fd, std::string session_id, std::filesystem::path path,
                         Seq next_seq, TraceOptions options)
    : fd_(fd),
      session_id_(std::move(session_id)),
      path_(std::move(path)),
      next_seq_(next_seq),
      options_(std::move(options)) {
  if (!options_.clock) options_.clock = utc_now;
}

TraceWriter::TraceWriter(TraceWriter&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)),
      session_id_(std::move(other.session_id_)),
      path_(std::move(other.path_)),
      next_seq_(other.next_seq_),
      options_(std::move(other.options_)) {}

TraceWriter& TraceWriter::operator=(TraceWriter&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(other.fd_, -1);
    session_id_ = std::move(other.session_id_);
    path_ = std::move(other.path_);
    next_seq_ = other.next_seq_;
    options_ = std::move(other.options_);
  }
  return *this;
}

TraceWriter::~TraceWriter() {
  if (fd_ >= 0) ::close(fd_);
}

TraceWriter TraceWriter::create(const std::filesystem::path& dir,
                                const std::string& session_id,
                                nlohmann::json start_payload, TraceOptions options) {
  check_session_id(session_id);
  ensure_dir(dir);
  auto path = trace_path(dir, session_id);
  int fd = open_append(path, /*exclusive=*/true);
  TraceWriter writer(fd, session_id, path, 0, std::move(options));
  start_payload["schema_version"] = kTraceSchemaVersion;
  writer.append(EventType::session_start, std::move(start_payload));
  return writer;
}

TraceWriter TraceWriter::resume(const std::filesystem::path& dir,
                                const std::string& session_id,
                                nlohmann::json resume_payload, TraceOptions options) {
  check_session_id(session_id);
  auto path = trace_path(dir, session_id);
  const auto events = read_trace(path);
  int fd = open_append(path, /*exclusive=*/false);
  TraceWriter writer(fd, session_id, path, events.back().seq + 1, std::move(options));
  writer.append(EventType::session_resume, std::move(resume_payload));
  return writer;
}

TraceEvent TraceWriter::append(EventType type, nlohmann::json payload) {
  if (fd_ < 0) {
    throw Error(ErrorCode::closed, "trace " + path_.string() + " is closed");
  }
  TraceEvent event;
  event.seq = next_seq_;
  event.ts = options_.clock();
  event.session = session_id_;
  event.type = type;
  event.payload = payload.is_null() ? nlohmann::json::object() : std::move(payload);
  write_all(fd_, event_to_line(event) + "\n", path_);
  if (options_.fsync && ::fdatasync(fd_) != 0) {
    throw Error(ErrorCode::io, "fdatasync " + path_.string() + ": " + errno_text());
  }
  ++next_seq_;
  return event;
}

void TraceWriter::close() {
  if (fd_ < 0) throw Error(ErrorCode::closed, "trace already closed");
  append(EventType::session_end, nlohmann::json::object());
  ::close(fd_);
  fd_ = -1;
}

// ---- reading ----------------------------------------------------------------

std::vector<TraceEvent> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) {
      throw Error(ErrorCode::not_found, "no trace at " + path.string());
    }
    throw Error(ErrorCode::io, "cannot read " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string data = buf.str();

  std::vector<TraceEvent> events;
  Seq last_good = -1;
  std::size_t start = 0;
  std::string session;
  while (start < data.size()) {
    const std::size_t end = data.find('\n', start);
    if (end == std::string::npos) {
      throw TraceCorrupt(last_good, "truncated line after seq " +
                                        std::to_string(last_good));
    }
    const std::string_view line(data.data() + start, end - start);
    start = end + 1;
    TraceEvent e;
    try {
      e = event_from_json(nlohmann::json::parse(line));
    } catch (const std::exception& ex) {
      throw TraceCorrupt(last_good, "unreadable event after seq " +
                                        std::to_string(last_good) + ": " + ex.what());
    }
    if (e.seq != last_good + 1) {
      throw TraceCorrupt(last_good, "seq " + std::to_string(e.seq) + " follows " +
                                        std::to_string(last_good));
    }
    if (events.empty()) {
      if (e.type != EventType::session_start) {
        throw TraceCorrupt(last_good, "trace does not begin with session-start");
      }
      const auto version = e.payload.value("schema_version", 0);
      if (version < 1 || version > kTraceSchemaVersion) {
        throw TraceCorrupt(last_good, "unsupported trace schema version " +
                                          std::to_string(version));
      }
      session = e.session;
    } else if (e.session != session) {
      throw TraceCorrupt(last_good, "event " + std::to_string(e.seq) +
                                        " belongs to another session");
    }
    last_good = e.seq;
    events.push_back(std::move(e));
  }
  if (events.empty()) throw TraceCorrupt(-1, "empty trace " + path.string());
  return events;
}

const TraceEvent& resolve_anchor(std::span<const TraceEvent> events, Seq seq) {
  // seq is contiguous from 0, so the index is the seq.
  if (seq < 0 || static_cast<std::size_t>(seq) >= events.size() ||
      events[static_cast<std::size_t>(seq)].seq != seq) {
    throw Error(ErrorCode::not_found,
                "anchor " + std::to_string(seq) + " is not in this session's log");
  }
  return events[static_cast<std::size_t>(seq)];
}

nlohmann::json make_start_payload(const EngineConfig& config,
                                  std::span<const PatternEntry> patterns) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& p : patterns) {
    list.push_back({{"id", p.id}, {"maturity", to_string(p.maturity)}});
  }
  return {{"schema_version", kTraceSchemaVersion}, {"config", config}, {"patterns", list}};
}

std::vector<PatternEntry> library_entries(const PatternLibrary& library) {
  std::vector<PatternEntry> out;
  for (const auto& [id, doc] : library.patterns) {
    out.push_back({id, classify_maturity(doc).state});
  }
  return out;
}

// ---- replay -------------------------------------------------------------------

void fold_event(SessionState& state, const TraceEvent& event) {
  if (event.seq != state.last_seq + 1) {
    throw Error(ErrorCode::corrupt_trace, "seq " + std::to_string(event.seq) +
                                              " does not follow " +
                                              std::to_string(state.last_seq));
  }
  const auto& p = event.payload;
  switch (event.type) {
    case EventType::session_start: {
      if (state.last_seq != -1) {
        throw Error(ErrorCode::corrupt_trace, "session-start after seq 0");
      }
      const int version = p.at("schema_version").get<int>();
      if (version > kTraceSchemaVersion) {
        throw Error(ErrorCode::schema, "unsupported trace schema version");
      }
      state.session_id = event.session;
      state.config = p.at("config").get<EngineConfig>();
      std::vector<PatternId> ids;
      state.beliefs = initial_beliefs(ids, state.config);
      register_patterns(state, p.at("patterns"));
      break;
    }
    case EventType::session_resume:
      if (p.contains("patterns_added")) register_patterns(state, p.at("patterns_added"));
      state.ended = false;
      break;
    case EventType::psr: {
      auto record = p.get<SelectionRecord>();
      state.last_spread = score_spread(record.candidates, state.config.epsilon);
      state.last_selection = std::move(record);
      break;
    }
    case EventType::pattern_read:
    case EventType::pattern_update:
    case EventType::pattern_implement:
    case EventType::pur:
      state.beliefs = update_beliefs(state.beliefs, event);
      break;
    case EventType::turn_boundary:
      state.turns += 1;
      break;
    case EventType::belief_update: {
      const auto& obs = p.at("observation");
      TauObservation o{obs.at("text_length").get<double>(), obs.at("spread").get<double>()};
      state.beliefs = update_tau(state.beliefs, o, state.config);
      if (p.contains("snapshot") && p.at("snapshot") != belief_snapshot(state.beliefs)) {
        throw Error(ErrorCode::corrupt_trace, "belief-update snapshot at seq " +
                                                  std::to_string(event.seq) +
                                                  " disagrees with replayed state");
      }
      break;
    }
    case EventType::session_end:
      state.ended = true;
      break;
    default:
      break;
  }
  state.last_seq = event.seq;
}

nlohmann::json make_belief_update_payload(const SessionState& state,
                                          const TauObservation& obs) {
  const BeliefState next = update_tau(state.beliefs, obs, state.config);
  return {{"observation", {{"text_length", obs.text_length}, {"spread", obs.spread}}},
          {"turn", state.turns},
          {"snapshot", belief_snapshot(next)}};
}

SessionState replay(std::span<const TraceEvent> events) {
  SessionState state;
  for (const auto& e : events) {
    try {
      fold_event(state, e);
    } catch (const TraceCorrupt&) {
      throw;
    } catch (const std::exception& ex) {
      throw TraceCorrupt(state.last_seq, "replay stopped at seq " + std::to_string(e.seq) +
                                             ": " + ex.what());
    }
  }
  return state;
}

SessionState replay(const std::filesystem::path& path) {
  const auto events = read_trace(path);
  return replay(std::span<const TraceEvent>(events));
}

// ---- locking and live sessions ------------------------------------------------

SessionLock::SessionLock(const std::filesystem::path& dir, const std::string& session_id) {
  check_session_id(session_id);
  ensure_dir(dir);
  const auto path = dir / (session_id + ".lock");
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(ErrorCode::io, "cannot open lock " + path.string());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw Error(ErrorCode::busy, "session '" + session_id + "' is in use by another process");
  }
}

SessionLock::SessionLock(SessionLock&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}

SessionLock::~SessionLock() {
  if (fd_ >= 0) ::close(fd_);
}

Session::Session(std::optional<SessionLock> lock, TraceWriter writer, SessionState state,
                 bool resumed)
    : lock_(std::move(lock)),
      writer_(std::move(writer)),
      state_(std::move(state)),
      resumed_(resumed) {}

Session Session::open(const std::filesystem::path& dir, const std::string& session_id,
                      const PatternLibrary& library, const EngineConfig& config,
                      OpenMode mode, TraceOptions options, bool lock) {
  check_session_id(session_id);
  std::optional<SessionLock> held;
  if (lock) held.emplace(dir, session_id);

  std::error_code ec;
  const bool exists = std::filesystem::exists(trace_path(dir, session_id), ec);
  if (mode == OpenMode::create && exists) {
    throw Error(ErrorCode::invalid_argument,
                "session '" + session_id + "' already exists; resume it instead");
  }
  if (mode == OpenMode::resume && !exists) {
    throw Error(ErrorCode::not_found, "unknown session '" + session_id + "'");
  }

  if (!exists) {
    const auto entries = library_entries(library);
    auto writer = TraceWriter::create(dir, session_id, make_start_payload(config, entries),
                                      std::move(options));
    SessionState state;
    // Fold what the writer just persisted.
    fold_event(state, read_trace(writer.path()).front());
    return Session(std::move(held), std::move(writer), std::move(state), false);
  }

  SessionState state = replay(trace_path(dir, session_id));
  nlohmann::json added = nlohmann::json::array();
  for (const auto& entry : library_entries(library)) {
    if (state.maturity.count(entry.id) == 0) {
      added.push_back({{"id", entry.id}, {"maturity", to_string(entry.maturity)}});
    }
  }
  nlohmann::json payload = {{"patterns_added", added}};
  auto writer = TraceWriter::resume(dir, session_id, payload, std::move(options));
  TraceEvent resume_event;
  resume_event.seq = writer.next_seq() - 1;
  resume_event.session = session_id;
  resume_event.type = EventType::session_resume;
  resume_event.payload = payload;
  fold_event(state, resume_event);
  return Session(std::move(held), std::move(writer), std::move(state), true);
}

TraceEvent Session::append(EventType type, nlohmann::json payload) {
  if (payload.is_null()) payload = nlohmann::json::object();
  TraceEvent pending;
  pending.seq = writer_.next_seq();
  pending.session = writer_.session_id();
  pending.type = type;
  pending.payload = payload;
  // Validate against a copy so a rejected event never reaches the file.
  SessionState next = state_;
  fold_event(next, pending);
  TraceEvent written = writer_.append(type, std::move(payload));
  state_ = std::move(next);
  return written;
}

void Session::close() {
  const Seq end_seq = writer_.next_seq();
  writer_.close();
  TraceEvent end;
  end.seq = end_seq;
  end.session = writer_.session_id();
  end.type = EventType::session_end;
  fold_event(state_, end);
}

}  // namespace futon
