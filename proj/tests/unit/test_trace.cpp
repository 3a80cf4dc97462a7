#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "futon/error.hpp"
#include "futon/trace.hpp"
#include "support.hpp"

using namespace futon;

namespace {

TraceOptions synthetic() {
  TraceOptions o;
  o.clock = synthetic_clock(1700000000000);
  return o;
}

nlohmann::json start_payload() {
  const std::vector<PatternEntry> entries = {{"t/a", Maturity::greenfield}};
  return make_start_payload(EngineConfig{}, entries);
}

PatternLibrary small_library() {
  PatternLibrary lib;
  for (const char* id : {"t/a", "t/b"}) {
    auto r = parse_pattern(testing::minimal_pattern(id, true, false), id);
    lib.patterns[id] = *r.document;
  }
  return lib;
}

void expect_contiguous(const std::vector<TraceEvent>& events) {
  for (std::size_t i = 0; i < events.size(); ++i) {
    REQUIRE(events[i].seq == static_cast<Seq>(i));
  }
}

}  // namespace

TEST_CASE("seq is contiguous from zero") {
  testing::TempDir dir;
  TraceWriter w = TraceWriter::create(dir.path(), "s1", start_payload(), synthetic());
  for (int i = 0; i < 100; ++i) {
    const TraceEvent e = w.append(EventType::observation, {{"source", "test"}, {"i", i}});
    CHECK(e.seq == i + 1);
  }
  w.close();
  const auto events = read_trace(w.path());
  REQUIRE(events.size() == 102);
  expect_contiguous(events);
  CHECK(events.front().type == EventType::session_start);
  CHECK(events.front().payload.at("schema_version") == kTraceSchemaVersion);
  CHECK(events.back().type == EventType::session_end);
  for (const auto& e : events) CHECK(e.session == "s1");
}

TEST_CASE("append after close is rejected") {
  testing::TempDir dir;
  TraceWriter w = TraceWriter::create(dir.path(), "s", start_payload());
  w.close();
  try {
    w.append(EventType::observation, {});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::closed);
  }
}

TEST_CASE("create refuses an existing session") {
  testing::TempDir dir;
  TraceWriter::create(dir.path(), "s", start_payload()).close();
  try {
    TraceWriter::create(dir.path(), "s", start_payload());
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
  }
}

TEST_CASE("resume continues seq with a session-resume event") {
  testing::TempDir dir;
  {
    TraceWriter w = TraceWriter::create(dir.path(), "r", start_payload());
    w.append(EventType::intent, {{"text", "x"}});
  }
  {
    TraceWriter w = TraceWriter::resume(dir.path(), "r", {{"patterns_added", nlohmann::json::array()}});
    CHECK(w.next_seq() == 3);
    w.append(EventType::observation, {{"source", "t"}});
  }
  {
    TraceWriter w = TraceWriter::resume(dir.path(), "r", {{"patterns_added", nlohmann::json::array()}});
    w.close();
  }
  const auto events = read_trace(trace_path(dir.path(), "r"));
  expect_contiguous(events);
  REQUIRE(events.size() == 6);
  CHECK(events[2].type == EventType::session_resume);
  CHECK(events[4].type == EventType::session_resume);
  CHECK(events[5].type == EventType::session_end);
}

TEST_CASE("unknown session") {
  testing::TempDir dir;
  try {
    TraceWriter::resume(dir.path(), "ghost", {});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::not_found);
  }
  try {
    read_trace(dir / "ghost.jsonl");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::not_found);
  }
}

TEST_CASE("session ids") {
  CHECK(is_valid_session_id("sim-42"));
  CHECK(is_valid_session_id("a.b_c"));
  CHECK_FALSE(is_valid_session_id(""));
  CHECK_FALSE(is_valid_session_id(".hidden"));
  CHECK_FALSE(is_valid_session_id("../up"));
  CHECK_FALSE(is_valid_session_id("a/b"));
  testing::TempDir dir;
  CHECK_THROWS_AS(TraceWriter::create(dir.path(), "../x", start_payload()), Error);
}

TEST_CASE("corrupt traces report the last good seq") {
  testing::TempDir dir;
  TraceWriter w = TraceWriter::create(dir.path(), "c", start_payload());
  for (int i = 0; i < 4; ++i) w.append(EventType::observation, {{"source", "t"}});
  w.close();
  const std::string good = testing::read_file(w.path());

  SUBCASE("truncated final line") {
    testing::write_file(w.path(), good.substr(0, good.size() - 5));
    try {
      read_trace(w.path());
      FAIL("expected throw");
    } catch (const TraceCorrupt& e) {
      CHECK(e.last_good_seq() == 4);
      CHECK(e.code() == ErrorCode::corrupt_trace);
    }
  }
  SUBCASE("seq gap") {
    std::string text = good;
    const auto pos = text.find("\"seq\":3");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 7, "\"seq\":9");
    testing::write_file(w.path(), text);
    try {
      read_trace(w.path());
      FAIL("expected throw");
    } catch (const TraceCorrupt& e) {
      CHECK(e.last_good_seq() == 2);
    }
  }
  SUBCASE("garbage line") {
    testing::write_file(w.path(), "not json\n");
    try {
      read_trace(w.path());
      FAIL("expected throw");
    } catch (const TraceCorrupt& e) {
      CHECK(e.last_good_seq() == -1);
    }
  }
}

TEST_CASE("resolve_anchor") {
  testing::TempDir dir;
  TraceWriter w = TraceWriter::create(dir.path(), "a", start_payload());
  w.append(EventType::intent, {{"text", "x"}});
  w.close();
  const auto events = read_trace(w.path());
  CHECK(resolve_anchor(events, 1).type == EventType::intent);
  CHECK(resolve_anchor(events, 0).type == EventType::session_start);
  for (Seq bad : {Seq{-1}, Seq{3}, Seq{1000}}) {
    try {
      resolve_anchor(events, bad);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::not_found);
    }
  }
}

TEST_CASE("every append leaves the earlier bytes untouched") {
  testing::TempDir dir;
  TraceWriter w = TraceWriter::create(dir.path(), "p", start_payload(), synthetic());
  std::string previous = testing::read_file(w.path());
  for (int i = 0; i < 50; ++i) {
    w.append(i % 2 ? EventType::observation : EventType::tool_call,
             {{"name", "n"}, {"text", std::string(static_cast<std::size_t>(i), 'x')}});
    const std::string now = testing::read_file(w.path());
    REQUIRE(now.size() > previous.size());
    REQUIRE(now.compare(0, previous.size(), previous) == 0);
    REQUIRE(now.back() == '\n');
    previous = now;
  }
}

TEST_CASE("event lines round-trip") {
  TraceEvent e;
  e.seq = 12;
  e.ts = "2026-01-01T00:00:00.000Z";
  e.session = "s";
  e.type = EventType::pattern_select;
  e.payload = {{"pattern", "t/a"}, {"note", "line\nbreak \xc3\xa9"}};
  const std::string line = event_to_line(e);
  CHECK(line.find('\n') == std::string::npos);
  const TraceEvent back = event_from_json(nlohmann::json::parse(line));
  CHECK(back.seq == e.seq);
  CHECK(back.type == e.type);
  CHECK(back.payload == e.payload);
  CHECK(line.rfind("{\"seq\":12,\"ts\":", 0) == 0);
}

TEST_CASE("session replay matches live state") {
  testing::TempDir dir;
  const PatternLibrary lib = small_library();
  Session s = Session::open(dir.path(), "live", lib, EngineConfig{}, OpenMode::create, synthetic());
  s.append(EventType::pattern_read, {{"pattern", "t/a"}, {"note", ""}});
  UseRecord u{"t/a", 1, Outcome::success, "ok", delta_for(Outcome::success)};
  s.append(EventType::pur, u);
  s.append(EventType::turn_boundary, {{"turn", 0}});
  s.append(EventType::belief_update, make_belief_update_payload(s.state(), {350.0, 0.2}));
  const BeliefState live = s.state().beliefs;
  s.close();
  const SessionState replayed = replay(trace_path(dir.path(), "live"));
  CHECK(replayed.beliefs == live);
  CHECK(replayed.ended);
  CHECK(replayed.turns == 1);
  CHECK(replayed.beliefs.at("t/a").uses == 1);
  CHECK(replayed.beliefs.tau_observation_count == 1);
}

TEST_CASE("session rejects events that would not replay") {
  testing::TempDir dir;
  const PatternLibrary lib = small_library();
  Session s = Session::open(dir.path(), "v", lib, EngineConfig{}, OpenMode::create);
  const Seq before = s.writer().next_seq();
  try {
    s.append(EventType::pattern_read, {{"pattern", "t/zzz"}, {"note", ""}});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::unknown_pattern);
  }
  CHECK(s.writer().next_seq() == before);
  s.close();
  CHECK_NOTHROW(replay(trace_path(dir.path(), "v")));
}

TEST_CASE("tampered snapshot is detected") {
  testing::TempDir dir;
  const PatternLibrary lib = small_library();
  Session s = Session::open(dir.path(), "t", lib, EngineConfig{}, OpenMode::create);
  s.append(EventType::belief_update, make_belief_update_payload(s.state(), {100.0, 0.0}));
  s.close();
  const auto path = trace_path(dir.path(), "t");
  std::string text = testing::read_file(path);
  const auto pos = text.find("\"tau_observation_count\":1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 25, "\"tau_observation_count\":7");
  testing::write_file(path, text);
  CHECK_THROWS_AS(replay(path), TraceCorrupt);
}

TEST_CASE("session open modes and locking") {
  testing::TempDir dir;
  PatternLibrary lib = small_library();
  {
    Session s = Session::open(dir.path(), "m", lib, EngineConfig{}, OpenMode::create);
    try {
      Session::open(dir.path(), "m", lib, EngineConfig{}, OpenMode::create_or_resume);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::busy);
    }
  }
  try {
    Session::open(dir.path(), "m", lib, EngineConfig{}, OpenMode::create);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_argument);
  }
  try {
    Session::open(dir.path(), "none", lib, EngineConfig{}, OpenMode::resume);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::not_found);
  }

  EngineConfig other;
  other.tau0 = 3.0;
  lib.patterns["t/c"] = *parse_pattern(testing::minimal_pattern("t/c", false, true), "c").document;
  Session r = Session::open(dir.path(), "m", lib, other, OpenMode::create_or_resume);
  CHECK(r.resumed());
  CHECK(r.state().config == EngineConfig{});
  CHECK(r.state().beliefs.patterns.count("t/c") == 1);
  CHECK(r.state().maturity.at("t/c") == Maturity::settled);
  r.close();
  const auto events = read_trace(trace_path(dir.path(), "m"));
  expect_contiguous(events);
  const auto& resume = events.at(1);
  CHECK(resume.type == EventType::session_resume);
  CHECK(resume.payload.at("patterns_added").size() == 1);
}
