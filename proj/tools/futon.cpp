// futon: command-line front end for pattern linting, selection, traced agent
// sessions, reports and simulations.
//
// Exit status: 0 success, 1 validation errors, 2 usage errors, 3 io errors.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "futon/error.hpp"
#include "futon/parser.hpp"
#include "futon/runner.hpp"
#include "futon/sim.hpp"
#include "futon/trace.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit : int { kOk = 0, kValidation = 1, kUsage = 2, kIo = 3 };

int exit_for(futon::ErrorCode code) {
  switch (code) {
    case futon::ErrorCode::io:
    case futon::ErrorCode::not_found:
    case futon::ErrorCode::busy:
      return kIo;
    case futon::ErrorCode::invalid_argument:
      return kUsage;
    default:
      return kValidation;
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw futon::Error(futon::ErrorCode::io, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void print_diagnostic(std::ostream& out, const futon::ParseDiagnostic& d) {
  out << d.file << ':' << d.line << ": " << futon::to_string(d.severity) << " [" << d.rule
      << "] " << d.message << '\n';
}

futon::EngineConfig load_engine_config(const std::string& path) {
  if (path.empty()) return {};
  return futon::parse_engine_config(read_file(path));
}

futon::PatternLibrary load_checked_library(const std::string& root) {
  futon::PatternLibrary lib = futon::load_library(root);
  for (const auto& d : lib.diagnostics) {
    if (d.severity == futon::Severity::error) print_diagnostic(std::cerr, d);
  }
  return lib;
}

// ---- lint / classify ----------------------------------------------------------

struct LintOptions {
  std::vector<std::string> paths;
  bool strict = false;
  bool verbose = false;
};

std::vector<fs::path> expand_paths(const std::vector<std::string>& paths, bool& io_failed) {
  std::vector<fs::path> files;
  for (const auto& p : paths) {
    std::error_code ec;
    if (fs::is_directory(p, ec)) {
      std::vector<fs::path> found;
      for (auto it = fs::recursive_directory_iterator(p, ec);
           !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (it->is_regular_file() && it->path().extension() == futon::kPatternExtension) {
          found.push_back(it->path());
        }
      }
      if (ec) {
        std::cerr << p << ": cannot read directory: " << ec.message() << '\n';
        io_failed = true;
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.emplace_back(p);
    }
  }
  return files;
}

int cmd_lint(const LintOptions& opt) {
  bool io_failed = false;
  int errors = 0;
  int warnings = 0;
  const auto files = expand_paths(opt.paths, io_failed);
  for (const auto& file : files) {
    std::string text;
    try {
      text = read_file(file);
    } catch (const futon::Error& e) {
      std::cerr << file.string() << ": " << e.what() << '\n';
      io_failed = true;
      continue;
    }
    auto result = futon::parse_pattern(text, file.string());
    auto diagnostics = result.diagnostics;
    if (result.document) {
      auto lint = futon::lint_pattern(*result.document,
                                      opt.strict ? futon::LintMode::strict
                                                 : futon::LintMode::lenient);
      diagnostics.insert(diagnostics.end(), lint.begin(), lint.end());
    }
    for (const auto& d : diagnostics) {
      if (d.severity == futon::Severity::error) ++errors;
      if (d.severity == futon::Severity::warning) ++warnings;
      if (d.severity != futon::Severity::info || opt.verbose) print_diagnostic(std::cout, d);
    }
  }
  std::cout << files.size() << " file(s), " << errors << " error(s), " << warnings
            << " warning(s)\n";
  if (io_failed) return kIo;
  return errors > 0 ? kValidation : kOk;
}

int cmd_classify(const std::vector<std::string>& paths) {
  bool io_failed = false;
  bool parse_failed = false;
  for (const auto& file : expand_paths(paths, io_failed)) {
    std::string text;
    try {
      text = read_file(file);
    } catch (const futon::Error& e) {
      std::cerr << file.string() << ": " << e.what() << '\n';
      io_failed = true;
      continue;
    }
    auto result = futon::parse_pattern(text, file.string());
    if (!result.document) {
      for (const auto& d : result.diagnostics) print_diagnostic(std::cerr, d);
      parse_failed = true;
      continue;
    }
    const auto m = futon::classify_maturity(*result.document);
    std::cout << result.document->id << "\t:" << futon::to_string(m.state) << "\t"
              << m.precision_prior << "\t" << file.string() << '\n';
  }
  if (io_failed) return kIo;
  return parse_failed ? kValidation : kOk;
}

// ---- select / run / report --------------------------------------------------------

struct SessionOptions {
  std::string library;
  std::string trace_dir;
  std::string session;
  std::string config;
  bool fsync = false;
};

struct SelectOptions {
  std::string intent;
  std::optional<std::uint64_t> seed;
  std::optional<double> tau;
  bool explore = false;
  bool greedy = false;
  bool json = false;
};

int cmd_select(const SessionOptions& so, const SelectOptions& opt) {
  if (opt.tau && !(*opt.tau > 0.0)) {
    std::cerr << "--tau must be positive\n";
    return kUsage;
  }
  const auto library = load_checked_library(so.library);
  if (library.patterns.empty()) {
    std::cerr << "no-candidates: library " << so.library << " has no loadable patterns\n";
    return kValidation;
  }
  futon::TraceOptions trace_options;
  trace_options.fsync = so.fsync;
  auto session = futon::Session::open(so.trace_dir, so.session, library,
                                      load_engine_config(so.config),
                                      futon::OpenMode::create_or_resume, trace_options);
  futon::SelectRequest request;
  request.intent = opt.intent;
  request.seed = opt.seed ? *opt.seed : std::random_device{}();
  request.explore_flag = opt.explore;
  request.greedy = opt.greedy;
  request.tau_override = opt.tau;
  futon::SelectOutcome outcome;
  try {
    outcome = futon::run_select(session, library, request);
  } catch (...) {
    session.close();
    throw;
  }
  session.close();
  if (opt.json) {
    nlohmann::json j = outcome.record;
    j["psr_seq"] = outcome.psr_seq;
    j["select_seq"] = outcome.select_seq;
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << futon::format_selection(outcome.record);
  }
  return kOk;
}

int cmd_run(const SessionOptions& so, bool resume, const std::string& input_path) {
  const auto library = load_checked_library(so.library);
  futon::TraceOptions trace_options;
  trace_options.fsync = so.fsync;
  auto session = futon::Session::open(
      so.trace_dir, so.session, library, load_engine_config(so.config),
      resume ? futon::OpenMode::resume : futon::OpenMode::create, trace_options);
  futon::RunSummary summary;
  if (input_path.empty() || input_path == "-") {
    summary = futon::run_stream(std::cin, session, library);
  } else {
    std::ifstream in(input_path);
    if (!in) {
      session.close();
      throw futon::Error(futon::ErrorCode::io, "cannot read " + input_path);
    }
    summary = futon::run_stream(in, session, library);
  }
  std::cout << "session " << so.session << ": " << summary.lines << " line(s), "
            << summary.signals << " signal(s), " << summary.warnings
            << " warning(s), last seq " << summary.state.last_seq << '\n';
  return kOk;
}

int cmd_report(const SessionOptions& so, bool json) {
  const auto events = futon::read_trace(futon::trace_path(so.trace_dir, so.session));
  const auto report = futon::build_report(events);
  if (json) {
    std::cout << futon::report_to_json(report).dump(2) << '\n';
  } else {
    std::cout << futon::format_report(report);
  }
  return kOk;
}

// ---- sim ---------------------------------------------------------------------

struct SimOptions {
  std::string config;
  std::string library;
  std::string trace_dir;
  std::vector<std::string> success;
  std::optional<std::int64_t> turns;
  std::optional<std::uint64_t> seed;
  std::string intent;
  std::string session;
  std::string out;
  bool explore = false;
};

int cmd_sim(const SimOptions& opt) {
  futon::SimConfig config;
  if (!opt.config.empty()) {
    const fs::path path(opt.config);
    config = futon::parse_sim_config(read_file(path), path.parent_path());
  } else {
    config.library = load_checked_library(opt.library);
  }
  for (const auto& entry : opt.success) {
    const auto eq = entry.rfind('=');
    if (eq == std::string::npos) {
      std::cerr << "--success expects <pattern-id>=<probability>\n";
      return kUsage;
    }
    config.true_success[entry.substr(0, eq)] = std::stod(entry.substr(eq + 1));
  }
  if (opt.turns) config.turns = *opt.turns;
  if (opt.seed) config.seed = *opt.seed;
  if (!opt.intent.empty()) config.intent = opt.intent;
  if (opt.explore) config.explore_flag = true;
  if (!opt.session.empty()) config.session_id = opt.session;
  if (config.trace_dir.empty() || !opt.trace_dir.empty()) config.trace_dir = opt.trace_dir;

  const auto report = futon::run_simulation(config);
  const auto summary = futon::sim_report_to_json(report);
  if (!opt.out.empty()) {
    std::ofstream out(opt.out);
    if (!out) throw futon::Error(futon::ErrorCode::io, "cannot write " + opt.out);
    out << summary.dump(2) << '\n';
  }
  std::cout << "seed " << report.seed << ", " << report.turns << " turn(s), trace "
            << report.trace_file.string() << '\n';
  for (std::size_t w = 0; w < report.window_frequencies.size(); ++w) {
    std::cout << "window " << w << ':';
    for (const auto& [id, f] : report.window_frequencies[w]) std::cout << ' ' << id << '=' << f;
    std::cout << '\n';
  }
  std::cout << "replay matches live state: "
            << (futon::compare_replay(report) ? "yes" : "no") << '\n';
  return kOk;
}

void add_session_options(CLI::App* cmd, SessionOptions& so, bool with_library) {
  if (with_library) {
    cmd->add_option("--library", so.library, "Pattern library root")
        ->envname("FUTON_LIBRARY")
        ->default_val("library");
    cmd->add_option("--config", so.config, "Engine config file (key = value)");
    cmd->add_flag("--fsync", so.fsync, "fsync the trace after every event");
  }
  cmd->add_option("--trace-dir", so.trace_dir, "Directory holding <session>.jsonl traces")
      ->envname("FUTON_TRACE_DIR")
      ->default_val(".futon/traces");
  cmd->add_option("--session", so.session, "Session id")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pattern-guided agent sessions: lint, select, run, report"};
  app.set_version_flag("--version", "futon 0.1.0");
  app.require_subcommand(1);

  LintOptions lint;
  auto* lint_cmd = app.add_subcommand("lint", "Check pattern files against the template");
  lint_cmd->add_option("paths", lint.paths, "Pattern files or directories")->required();
  lint_cmd->add_flag("--strict", lint.strict, "Require every template field");
  lint_cmd->add_flag("-v,--verbose", lint.verbose, "Also print info notes");

  std::vector<std::string> classify_paths;
  auto* classify_cmd = app.add_subcommand("classify", "Print maturity and precision prior");
  classify_cmd->add_option("paths", classify_paths, "Pattern files or directories")
      ->required();

  SessionOptions select_session;
  SelectOptions select;
  auto* select_cmd = app.add_subcommand("select", "Score the library and sample a pattern");
  add_session_options(select_cmd, select_session, true);
  select_cmd->add_option("--intent", select.intent, "Stated intention")->required();
  select_cmd->add_option("--seed", select.seed, "Sampling seed");
  select_cmd->add_option("--tau", select.tau, "Override policy precision");
  select_cmd->add_flag("--explore", select.explore, "Exploratory mode (admits :stub patterns)");
  select_cmd->add_flag("--greedy", select.greedy, "Take the highest-probability pattern");
  select_cmd->add_flag("--json", select.json, "Print the selection record as JSON");

  SessionOptions run_session;
  bool resume = false;
  std::string input_path;
  auto* run_cmd = app.add_subcommand("run", "Trace an agent event stream read from stdin");
  add_session_options(run_cmd, run_session, true);
  run_cmd->add_flag("--resume", resume, "Append to an existing session");
  run_cmd->add_option("--input", input_path, "Read events from a file instead of stdin");

  SessionOptions report_session;
  bool report_json = false;
  auto* report_cmd = app.add_subcommand("report", "Summarize a session by replaying its trace");
  add_session_options(report_cmd, report_session, false);
  report_cmd->add_flag("--json", report_json, "Machine-readable output");

  SimOptions sim;
  auto* sim_cmd = app.add_subcommand("sim", "Run the synthetic-agent simulation");
  sim_cmd->add_option("--config", sim.config, "Simulation config file");
  sim_cmd->add_option("--library", sim.library, "Pattern library root")
      ->envname("FUTON_LIBRARY")
      ->default_val("library");
  sim_cmd->add_option("--trace-dir", sim.trace_dir, "Trace directory")
      ->envname("FUTON_TRACE_DIR")
      ->default_val(".futon/traces");
  sim_cmd->add_option("--success", sim.success, "True success rate, <pattern-id>=<p>");
  sim_cmd->add_option("--turns", sim.turns, "Number of turns");
  sim_cmd->add_option("--seed", sim.seed, "Seed");
  sim_cmd->add_option("--intent", sim.intent, "Intent text");
  sim_cmd->add_option("--session", sim.session, "Session id (default sim-<seed>)");
  sim_cmd->add_option("--out", sim.out, "Write the JSON report here");
  sim_cmd->add_flag("--explore", sim.explore, "Explicit exploratory mode");

  app.add_subcommand("roster-help", "Print the tool roster help text for agents");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*lint_cmd) return cmd_lint(lint);
    if (*classify_cmd) return cmd_classify(classify_paths);
    if (*select_cmd) return cmd_select(select_session, select);
    if (*run_cmd) return cmd_run(run_session, resume, input_path);
    if (*report_cmd) return cmd_report(report_session, report_json);
    if (*sim_cmd) return cmd_sim(sim);
    std::cout << futon::roster_help();
    return kOk;
  } catch (const futon::TraceCorrupt& e) {
    std::cerr << "corrupt trace (last good seq " << e.last_good_seq() << "): " << e.what()
              << '\n';
    return kValidation;
  } catch (const futon::Error& e) {
    std::cerr << futon::to_string(e.code()) << ": " << e.what() << '\n';
    return exit_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
}
