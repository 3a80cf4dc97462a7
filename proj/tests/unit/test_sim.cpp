#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "futon/error.hpp"
#include "futon/sim.hpp"
#include "support.hpp"

using namespace futon;

namespace {

PatternLibrary make_library(const std::vector<std::pair<std::string, Maturity>>& specs) {
  PatternLibrary lib;
  for (const auto& [id, m] : specs) {
    const bool next = m == Maturity::greenfield || m == Maturity::active;
    const bool ev = m == Maturity::settled || m == Maturity::active;
    lib.patterns[id] = *parse_pattern(testing::minimal_pattern(id, next, ev), id).document;
  }
  return lib;
}

SimConfig two_arm(const testing::TempDir& dir, std::uint64_t seed, double a, double b,
                  std::int64_t turns) {
  SimConfig c;
  c.library = make_library({{"arm/a", Maturity::greenfield}, {"arm/b", Maturity::greenfield}});
  c.true_success = {{"arm/a", a}, {"arm/b", b}};
  c.turns = turns;
  c.seed = seed;
  c.trace_dir = dir.path();
  return c;
}

}  // namespace

TEST_CASE("one-pattern library always picks it") {
  testing::TempDir dir;
  SimConfig c;
  c.library = make_library({{"solo/p", Maturity::active}});
  c.turns = 50;
  c.trace_dir = dir.path();
  const SimReport r = run_simulation(c);
  CHECK(std::all_of(r.selections.begin(), r.selections.end(),
                    [](const PatternId& id) { return id == "solo/p"; }));
  CHECK(r.final_state.beliefs.at("solo/p").uses == 50);
  CHECK(compare_replay(r));
}

TEST_CASE("learning concentrates on the better pattern") {
  int good_seeds = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    testing::TempDir dir;
    const SimReport r = run_simulation(two_arm(dir, seed, 0.9, 0.2, 500));
    REQUIRE(r.window_frequencies.size() == 5);
    const double last = r.window_frequencies.back().at("arm/a");
    if (last >= 0.7) ++good_seeds;
    CHECK(compare_replay(r));
  }
  CHECK(good_seeds >= 8);
}

TEST_CASE("equal arms are chosen about equally") {
  double total = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    testing::TempDir dir;
    const SimReport r = run_simulation(two_arm(dir, seed, 0.5, 0.5, 1000));
    const auto a = std::count(r.selections.begin(), r.selections.end(), "arm/a");
    const double diff = std::abs(static_cast<double>(2 * a - 1000)) / 1000.0;
    total += diff;
    CHECK(diff <= 0.2);
  }
  CHECK(total / 5.0 <= 0.1);
}

TEST_CASE("explore flag brings stubs into play") {
  const auto lib = make_library({{"x/green", Maturity::greenfield},
                                 {"x/active", Maturity::active},
                                 {"x/stub1", Maturity::stub},
                                 {"x/stub2", Maturity::stub}});
  int covered = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    testing::TempDir dir;
    SimConfig c;
    c.library = lib;
    c.turns = 200;
    c.seed = seed;
    c.trace_dir = dir.path();
    c.explore_flag = true;
    const SimReport r = run_simulation(c);
    const bool both = std::find(r.selections.begin(), r.selections.end(), "x/stub1") !=
                          r.selections.end() &&
                      std::find(r.selections.begin(), r.selections.end(), "x/stub2") !=
                          r.selections.end();
    if (both) ++covered;
    CHECK(std::all_of(r.modes.begin(), r.modes.end(),
                      [](SelectionMode m) { return m == SelectionMode::explore; }));

    testing::TempDir dir2;
    c.explore_flag = false;
    c.trace_dir = dir2.path();
    const SimReport plain = run_simulation(c);
    for (const auto& e : read_trace(plain.trace_file)) {
      if (e.type != EventType::psr) continue;
      for (const auto& cand : e.payload.at("candidates")) {
        REQUIRE(cand.at("maturity") != "stub");
      }
    }
  }
  CHECK(covered >= 9);
}

TEST_CASE("compare_replay notices a damaged trace") {
  testing::TempDir dir;
  const SimReport r = run_simulation(two_arm(dir, 4, 0.7, 0.3, 30));
  CHECK(compare_replay(r));
  std::string text = testing::read_file(r.trace_file);
  const auto pos = text.find("\"successes\":");
  REQUIRE(pos != std::string::npos);
  text[pos + 12] = text[pos + 12] == '9' ? '8' : '9';
  testing::write_file(r.trace_file, text);
  CHECK_FALSE(compare_replay(r));

  text = testing::read_file(r.trace_file);
  text[text.size() / 2] = '{';
  testing::write_file(r.trace_file, text);
  CHECK_FALSE(compare_replay(r));
}

TEST_CASE("zero turns") {
  testing::TempDir dir;
  const SimReport r = run_simulation(two_arm(dir, 1, 0.5, 0.5, 0));
  CHECK(r.selections.empty());
  CHECK(r.window_frequencies.empty());
  const auto events = read_trace(r.trace_file);
  CHECK(events.size() == 2);
  CHECK(compare_replay(r));
}

TEST_CASE("same seed gives the same trace bytes") {
  testing::TempDir a, b;
  const SimReport ra = run_simulation(two_arm(a, 77, 0.6, 0.4, 120));
  const SimReport rb = run_simulation(two_arm(b, 77, 0.6, 0.4, 120));
  CHECK(ra.selections == rb.selections);
  CHECK(testing::read_file(ra.trace_file) == testing::read_file(rb.trace_file));
  testing::TempDir c;
  const SimReport rc = run_simulation(two_arm(c, 78, 0.6, 0.4, 120));
  CHECK(rc.selections != ra.selections);
}

TEST_CASE("turn framing in the trace") {
  testing::TempDir dir;
  const SimReport r = run_simulation(two_arm(dir, 2, 0.5, 0.5, 3));
  const auto events = read_trace(r.trace_file);
  // start, intent, 8 per turn, end
  CHECK(events.size() == 2 + 8 * 3 + 1);
  CHECK(r.final_state.turns == 3);
  CHECK(r.final_state.beliefs.tau_observation_count == 3);
}

TEST_CASE("sim config validation and parsing") {
  testing::TempDir dir;
  SimConfig c = two_arm(dir, 1, 0.5, 0.5, 10);
  c.true_success["arm/a"] = 1.5;
  CHECK_THROWS_AS(validate(c), Error);
  c = two_arm(dir, 1, 0.5, 0.5, -1);
  CHECK_THROWS_AS(validate(c), Error);
  c = two_arm(dir, 1, 0.5, 0.5, 10);
  c.true_success["ghost"] = 0.5;
  CHECK_THROWS_AS(validate(c), Error);

  testing::write_file(dir / "lib/a.arg", testing::minimal_pattern("cfg/a", true, false));
  const SimConfig parsed = parse_sim_config(
      "library = lib\nturns = 20\nseed = 5\nsuccess.cfg/a = 0.75\ntau0 = 2\n"
      "trace_dir = traces\n",
      dir.path());
  CHECK(parsed.turns == 20);
  CHECK(parsed.seed == 5);
  CHECK(parsed.true_success.at("cfg/a") == 0.75);
  CHECK(parsed.engine.tau0 == 2.0);
  CHECK(parsed.trace_dir == dir / "traces");
  CHECK(parsed.library.patterns.size() == 1);
  CHECK_THROWS_AS(parse_sim_config("turns = 3\n", dir.path()), Error);

  const SimReport r = run_simulation(parsed);
  const nlohmann::json j = sim_report_to_json(r);
  CHECK(j.at("turns") == 20);
  CHECK(j.at("selection_totals").at("cfg/a") == 20);
}
