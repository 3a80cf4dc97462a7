#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "futon/engine.hpp"
#include "futon/error.hpp"
#include "futon/parser.hpp"
#include "futon/pattern.hpp"
#include "futon/sim.hpp"
#include "futon/trace.hpp"

namespace py = pybind11;

namespace {

// Hands JSON values to Python through the json module.
py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

std::vector<futon::CandidateScore> scores_from(const std::vector<double>& G,
                                               const std::vector<std::string>& ids) {
  if (!ids.empty() && ids.size() != G.size()) {
    throw futon::Error(futon::ErrorCode::invalid_argument, "ids and G differ in length");
  }
  std::vector<futon::CandidateScore> out(G.size());
  for (std::size_t i = 0; i < G.size(); ++i) {
    out[i].pattern_id = ids.empty() ? std::to_string(i) : ids[i];
    out[i].G = G[i];
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Pattern library, selection engine and session traces";

  auto base = py::register_exception<futon::Error>(m, "FutonError", PyExc_RuntimeError);
  py::register_exception<futon::TraceCorrupt>(m, "TraceCorrupt", base.ptr());

  py::enum_<futon::Maturity>(m, "Maturity")
      .value("stub", futon::Maturity::stub)
      .value("greenfield", futon::Maturity::greenfield)
      .value("active", futon::Maturity::active)
      .value("settled", futon::Maturity::settled);

  py::class_<futon::PatternDocument>(m, "PatternDocument")
      .def(py::init<>())
      .def_readwrite("id", &futon::PatternDocument::id)
      .def_readwrite("metadata", &futon::PatternDocument::metadata)
      .def_readwrite("annotations", &futon::PatternDocument::annotations)
      .def_readwrite("summary", &futon::PatternDocument::summary)
      .def_readwrite("context", &futon::PatternDocument::context)
      .def_readwrite("if_clause", &futon::PatternDocument::if_clause)
      .def_readwrite("however_clause", &futon::PatternDocument::however_clause)
      .def_readwrite("then_clause", &futon::PatternDocument::then_clause)
      .def_readwrite("because_clause", &futon::PatternDocument::because_clause)
      .def_readwrite("evidence", &futon::PatternDocument::evidence)
      .def_readwrite("next_steps", &futon::PatternDocument::next_steps)
      .def_property_readonly("header",
                             [](const futon::PatternDocument& d) { return futon::to_string(d.header); })
      .def_property_readonly("title", &futon::PatternDocument::title)
      .def("__eq__", [](const futon::PatternDocument& a, const futon::PatternDocument& b) {
        return a == b;
      })
      .def("__repr__", [](const futon::PatternDocument& d) {
        return "<PatternDocument " + d.id + ">";
      });

  py::class_<futon::ParseDiagnostic>(m, "Diagnostic")
      .def_property_readonly("severity",
                             [](const futon::ParseDiagnostic& d) { return futon::to_string(d.severity); })
      .def_readonly("rule", &futon::ParseDiagnostic::rule)
      .def_readonly("message", &futon::ParseDiagnostic::message)
      .def_readonly("file", &futon::ParseDiagnostic::file)
      .def_readonly("line", &futon::ParseDiagnostic::line)
      .def("__repr__", [](const futon::ParseDiagnostic& d) {
        return d.file + ":" + std::to_string(d.line) + ": " + futon::to_string(d.severity) + " [" +
               d.rule + "] " + d.message;
      });

  py::class_<futon::PatternLibrary>(m, "PatternLibrary")
      .def_property_readonly("root", [](const futon::PatternLibrary& l) { return l.root; })
      .def_readonly("patterns", &futon::PatternLibrary::patterns)
      .def_readonly("diagnostics", &futon::PatternLibrary::diagnostics)
      .def("__len__", [](const futon::PatternLibrary& l) { return l.patterns.size(); });

  m.def(
      "parse_pattern",
      [](const std::string& text, const std::string& origin) {
        futon::ParseResult r = futon::parse_pattern(text, origin);
        return py::make_tuple(r.document ? py::cast(*r.document) : py::none(), r.diagnostics);
      },
      py::arg("text"), py::arg("origin") = "<string>",
      "Returns (document or None, diagnostics).");
  m.def("serialize_pattern", &futon::serialize_pattern, py::arg("doc"));
  m.def(
      "lint_pattern",
      [](const futon::PatternDocument& doc, bool strict) {
        return futon::lint_pattern(doc, strict ? futon::LintMode::strict : futon::LintMode::lenient);
      },
      py::arg("doc"), py::arg("strict") = false);
  m.def(
      "classify",
      [](const futon::PatternDocument& doc) {
        const auto s = futon::classify_maturity(doc);
        return py::make_tuple(s.state, s.precision_prior);
      },
      py::arg("doc"), "Returns (maturity, precision prior).");
  m.def(
      "classify_presence",
      [](bool has_next_steps, bool has_evidence) {
        const auto s = futon::classify_maturity(futon::FieldPresence{has_next_steps, has_evidence});
        return py::make_tuple(s.state, s.precision_prior);
      },
      py::arg("has_next_steps"), py::arg("has_evidence"));
  m.def("load_library", &futon::load_library, py::arg("root"));
  m.def(
      "relevance", [](const std::string& intent, const futon::PatternDocument& doc) {
        return futon::relevance(intent, doc);
      },
      py::arg("intent"), py::arg("doc"));
  m.def(
      "expected_free_energy",
      [](const futon::PatternDocument& doc, std::int64_t uses, std::int64_t successes,
         const std::string& intent, bool explore) {
        futon::EngineConfig config;
        futon::BeliefState beliefs;
        beliefs.patterns[doc.id] = futon::PatternBelief{uses, successes, uses - successes, 0, -1};
        const auto s = futon::expected_free_energy(
            doc, beliefs, intent,
            explore ? futon::SelectionMode::explore : futon::SelectionMode::sampled, config);
        return to_python(nlohmann::json(s));
      },
      py::arg("doc"), py::arg("uses") = 0, py::arg("successes") = 0, py::arg("intent") = "",
      py::arg("explore") = false, "Scores one pattern with default weights.");
  m.def(
      "selection_distribution",
      [](const std::vector<double>& G, double tau) {
        std::vector<double> p;
        for (const auto& c : futon::selection_distribution(scores_from(G, {}), tau)) {
          p.push_back(c.probability);
        }
        return p;
      },
      py::arg("G"), py::arg("tau"));
  m.def(
      "sample_selection",
      [](const std::vector<double>& G, double tau, std::uint64_t seed) {
        const auto dist = futon::selection_distribution(scores_from(G, {}), tau);
        const auto r =
            futon::sample_selection(dist, seed, "", futon::SelectionMode::sampled, tau);
        return std::stoul(r.chosen);
      },
      py::arg("G"), py::arg("tau"), py::arg("seed"), "Index of the sampled candidate.");
  m.def(
      "run_simulation",
      [](const std::filesystem::path& library, const std::map<std::string, double>& success,
         std::int64_t turns, std::uint64_t seed, const std::filesystem::path& trace_dir,
         bool explore, const std::string& intent) {
        futon::SimConfig c;
        c.library = futon::load_library(library);
        c.true_success = success;
        c.turns = turns;
        c.seed = seed;
        c.trace_dir = trace_dir;
        c.explore_flag = explore;
        c.intent = intent;
        const futon::SimReport r = futon::run_simulation(c);
        nlohmann::json j = futon::sim_report_to_json(r);
        j["replay_matches"] = futon::compare_replay(r);
        return to_python(j);
      },
      py::arg("library"), py::arg("success"), py::arg("turns") = 500, py::arg("seed") = 0,
      py::arg("trace_dir") = ".futon/traces", py::arg("explore") = false,
      py::arg("intent") = "");
  m.def(
      "replay",
      [](const std::filesystem::path& path) {
        const futon::SessionState s = futon::replay(path);
        return to_python({{"session", s.session_id},
                          {"beliefs", s.beliefs},
                          {"turns", s.turns},
                          {"last_seq", s.last_seq},
                          {"ended", s.ended}});
      },
      py::arg("path"), "Rebuilds session state from a trace file.");

  m.attr("TRACE_SCHEMA_VERSION") = futon::kTraceSchemaVersion;
}
