#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "futon/engine.hpp"
#include "futon/parser.hpp"
#include "futon/trace.hpp"

namespace futon {

// Simulated agent output length per outcome class; failures run longer.
struct LengthModel {
  double success_mean = 400.0;
  double success_sd = 80.0;
  double failure_mean = 800.0;
  double failure_sd = 160.0;
};

struct SimConfig {
  PatternLibrary library;
  // Ground-truth helpfulness per pattern, hidden from the engine. Patterns
  // without an entry succeed with probability 0.5.
  std::map<PatternId, double> true_success;
  std::int64_t turns = 500;
  std::uint64_t seed = 0;
  EngineConfig engine;
  bool explore_flag = false;
  std::string intent;
  LengthModel lengths;
  std::int64_t window = 100;
  std::filesystem::path trace_dir;
  std::string session_id;  // defaults to "sim-<seed>"
};

// Throws Error(invalid_argument) on an invalid configuration.
void validate(const SimConfig& config);

// Keys: library, turns, seed, intent, explore, window, trace_dir, session,
// success.<pattern-id>, length.<field>, and any engine config key.
// Relative paths resolve against base_dir.
SimConfig parse_sim_config(std::string_view text, const std::filesystem::path& base_dir);

struct SimReport {
  std::uint64_t seed = 0;
  std::int64_t turns = 0;
  std::int64_t window = 100;
  std::vector<PatternId> selections;
  std::vector<SelectionMode> modes;
  std::vector<std::map<PatternId, double>> window_frequencies;
  SessionState final_state;
  std::filesystem::path trace_file;
};

SimReport run_simulation(const SimConfig& config);

// True iff replaying the written trace reproduces the live final beliefs.
bool compare_replay(const SimReport& report);

nlohmann::json sim_report_to_json(const SimReport& report);

}  // namespace futon
