#include "futon/parser.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <system_error>

#include "futon/error.hpp"

namespace futon {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Trims and collapses internal whitespace runs to a single space.
std::string normalize(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

struct Marker {
  std::string name;
  std::string_view rest;
};

// Matches `<sigil> name: rest` (whitespace allowed after the sigil and before
// the colon). Names start with a letter and may contain letters, digits, '-'
// and '_'.
std::optional<Marker> match_marker(std::string_view line, char sigil) {
  if (line.empty() || line.front() != sigil) return std::nullopt;
  std::size_t i = 1;
  while (i < line.size() && is_space(line[i])) ++i;
  std::size_t name_start = i;
  if (i >= line.size() || !std::isalpha(static_cast<unsigned char>(line[i]))) {
    return std::nullopt;
  }
  while (i < line.size() &&
         (std::isalnum(static_cast<unsigned char>(line[i])) || line[i] == '-' ||
          line[i] == '_')) {
    ++i;
  }
  std::size_t name_end = i;
  while (i < line.size() && is_space(line[i])) ++i;
  if (i >= line.size() || line[i] != ':') return std::nullopt;
  Marker m;
  m.name = std::string(line.substr(name_start, name_end - name_start));
  std::transform(m.name.begin(), m.name.end(), m.name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  m.rest = line.substr(i + 1);
  return m;
}

enum class Slot { none, discard, summary, annotation, clause, next_step, evidence };

struct OpenField {
  Slot slot = Slot::none;
  std::string name;
  int line = 0;
  std::string text;
};

bool is_single_clause(const std::string& name) {
  return name == "context" || name == "if" || name == "however" ||
         name == "then" || name == "because";
}

std::string* clause_slot(PatternDocument& doc, const std::string& name) {
  if (name == "context") return &doc.context;
  if (name == "if") return &doc.if_clause;
  if (name == "however") return &doc.however_clause;
  if (name == "then") return &doc.then_clause;
  if (name == "because") return &doc.because_clause;
  return nullptr;
}

class PatternReader {
 public:
  explicit PatternReader(const std::string& origin) : origin_(origin) {
    doc_.source.path = origin;
  }

  ParseResult run(std::string_view text) {
    auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      line_no_ = static_cast<int>(i) + 1;
      consume(lines[i]);
    }
    close_field();
    if (!have_header_) {
      emit(Severity::error, rules::kMissingHeader,
           "no @arg or @flexiarg header line", 1);
    }
    ParseResult result;
    result.diagnostics = std::move(diagnostics_);
    if (!has_errors(result.diagnostics)) {
      doc_.source.first_line = first_line_ == 0 ? 1 : first_line_;
      doc_.source.last_line = last_line_ == 0 ? 1 : last_line_;
      result.document = std::move(doc_);
    }
    return result;
  }

 private:
  void emit(Severity severity, std::string_view rule, std::string message,
            int line) {
    diagnostics_.push_back(
        {severity, std::string(rule), std::move(message), origin_, line});
  }

  void consume(std::string_view raw) {
    std::string_view line = trim(raw);
    if (line.empty()) return;
    if (first_line_ == 0) first_line_ = line_no_;
    last_line_ = line_no_;

    if (!raw.empty() && raw.front() == '@') {
      close_field();
      header_line(line);
      return;
    }
    if (auto m = match_marker(line, '!')) {
      close_field();
      open_bang(std::move(*m));
      return;
    }
    if (auto m = match_marker(line, '+')) {
      close_field();
      open_plus(std::move(*m));
      return;
    }
    if (open_.slot == Slot::none) {
      emit(Severity::warning, rules::kOrphanText,
           "text outside any field is ignored", line_no_);
      return;
    }
    open_.text.push_back(' ');
    open_.text.append(line);
  }

  void header_line(std::string_view line) {
    line.remove_prefix(1);
    std::size_t key_end = 0;
    while (key_end < line.size() && !is_space(line[key_end])) ++key_end;
    std::string key(line.substr(0, key_end));
    std::string value(trim(line.substr(key_end)));

    if (key == "arg" || key == "flexiarg") {
      if (have_header_) {
        emit(Severity::error, rules::kDuplicateHeader,
             "second @" + key + " header", line_no_);
        return;
      }
      have_header_ = true;
      doc_.header = key == "flexiarg" ? HeaderKind::flexiarg : HeaderKind::arg;
      if (!is_valid_pattern_id(value)) {
        emit(Severity::error, rules::kInvalidId,
             "pattern id must be non-empty and contain no whitespace: '" +
                 value + "'",
             line_no_);
      }
      doc_.id = value;
      return;
    }
    if (key.empty()) {
      emit(Severity::error, rules::kInvalidId, "empty header key", line_no_);
      return;
    }
    if (!doc_.metadata.emplace(key, normalize(value)).second) {
      emit(Severity::error, rules::kDuplicateField, "duplicate @" + key + " header",
           line_no_);
    }
  }

  void open_bang(Marker m) {
    open_.line = line_no_;
    open_.name = m.name;
    open_.text = std::string(m.rest);
    if (m.name == "conclusion") {
      if (seen_summary_) {
        emit(Severity::error, rules::kDuplicateField,
             "duplicate ! conclusion", line_no_);
        open_.slot = Slot::discard;
        return;
      }
      seen_summary_ = true;
      open_.slot = Slot::summary;
      return;
    }
    if (doc_.annotations.count(m.name) != 0) {
      emit(Severity::error, rules::kDuplicateField, "duplicate ! " + m.name,
           line_no_);
      open_.slot = Slot::discard;
      return;
    }
    open_.slot = Slot::annotation;
  }

  void open_plus(Marker m) {
    open_.line = line_no_;
    open_.name = m.name;
    open_.text = std::string(m.rest);
    doc_.source.fields.push_back({m.name, line_no_});
    if (is_single_clause(m.name)) {
      if (std::find(seen_clauses_.begin(), seen_clauses_.end(), m.name) !=
          seen_clauses_.end()) {
        emit(Severity::error, rules::kDuplicateField,
             "field '" + m.name + "' appears more than once", line_no_);
        open_.slot = Slot::discard;
        return;
      }
      seen_clauses_.push_back(m.name);
      open_.slot = Slot::clause;
    } else if (m.name == "next-steps") {
      open_.slot = Slot::next_step;
    } else if (m.name == "evidence") {
      open_.slot = Slot::evidence;
    } else {
      emit(Severity::warning, rules::kUnknownField,
           "unknown field '" + m.name + "' is ignored", line_no_);
      open_.slot = Slot::discard;
    }
  }

  void close_field() {
    if (open_.slot == Slot::none) return;
    std::string text = normalize(open_.text);
    switch (open_.slot) {
      case Slot::none:
      case Slot::discard:
        break;
      case Slot::summary:
      case Slot::annotation:
      case Slot::clause:
        if (text.empty()) {
          emit(Severity::error, rules::kUnterminatedField,
               "field '" + open_.name + "' has no content", open_.line);
        } else if (open_.slot == Slot::summary) {
          doc_.summary = std::move(text);
        } else if (open_.slot == Slot::annotation) {
          doc_.annotations[open_.name] = std::move(text);
        } else {
          *clause_slot(doc_, open_.name) = std::move(text);
        }
        break;
      case Slot::next_step:
      case Slot::evidence:
        if (text.empty()) {
          emit(Severity::warning, rules::kUnterminatedField,
               "empty '" + open_.name + "' entry is ignored", open_.line);
        } else if (open_.slot == Slot::next_step) {
          doc_.next_steps.push_back(std::move(text));
        } else {
          doc_.evidence.push_back(std::move(text));
        }
        break;
    }
    open_ = OpenField{};
  }

  std::string origin_;
  PatternDocument doc_;
  std::vector<ParseDiagnostic> diagnostics_;
  OpenField open_;
  std::vector<std::string> seen_clauses_;
  bool have_header_ = false;
  bool seen_summary_ = false;
  int line_no_ = 0;
  int first_line_ = 0;
  int last_line_ = 0;
};

int canonical_index(const std::string& name) {
  for (std::size_t i = 0; i < kRequiredFieldOrder.size(); ++i) {
    if (kRequiredFieldOrder[i] == name) return static_cast<int>(i);
  }
  return -1;
}

bool blank(const std::string& s) { return trim(s).empty(); }

}  // namespace

const char* to_string(Severity s) {
  switch (s) {
    case Severity::error:
      return "error";
    case Severity::warning:
      return "warning";
    case Severity::info:
      return "info";
  }
  return "error";
}

const std::vector<std::string_view>& published_rules() {
  static const std::vector<std::string_view> all = {
      rules::kMissingHeader,     rules::kDuplicateHeader,
      rules::kInvalidId,         rules::kDuplicateField,
      rules::kUnterminatedField, rules::kUnknownField,
      rules::kOrphanText,        rules::kRequiredFieldMissing,
      rules::kFieldOrder,        rules::kEmptyListEntry,
      rules::kNextStepsMissing,  rules::kEvidenceMissing,
      rules::kSemanticUnverified, rules::kDuplicateId,
      rules::kIoUnreadable};
  return all;
}

bool has_errors(const std::vector<ParseDiagnostic>& diagnostics) {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [](const ParseDiagnostic& d) {
                       return d.severity == Severity::error;
                     });
}

ParseResult parse_pattern(std::string_view text, const std::string& origin) {
  return PatternReader(origin).run(text);
}

std::string serialize_pattern(const PatternDocument& doc) {
  std::ostringstream out;
  out << '@' << to_string(doc.header) << ' ' << doc.id << '\n';
  for (const auto& [key, value] : doc.metadata) {
    out << '@' << key;
    if (!value.empty()) out << ' ' << value;
    out << '\n';
  }
  if (!doc.summary.empty() || !doc.annotations.empty()) {
    out << '\n';
    if (!doc.summary.empty()) out << "! conclusion: " << doc.summary << '\n';
    for (const auto& [key, value] : doc.annotations) {
      out << "! " << key << ": " << value << '\n';
    }
  }
  out << '\n';
  auto clause = [&out](std::string_view name, const std::string& text) {
    if (!text.empty()) out << "+ " << name << ": " << text << '\n';
  };
  clause("context", doc.context);
  clause("if", doc.if_clause);
  clause("however", doc.however_clause);
  clause("then", doc.then_clause);
  clause("because", doc.because_clause);
  for (const auto& e : doc.evidence) clause("evidence", e);
  for (const auto& n : doc.next_steps) clause("next-steps", n);
  return out.str();
}

std::vector<ParseDiagnostic> lint_pattern(const PatternDocument& doc,
                                          LintMode mode) {
  std::vector<ParseDiagnostic> out;
  const std::string& file = doc.source.path;
  const int head = doc.source.first_line > 0 ? doc.source.first_line : 1;
  auto emit = [&](Severity s, std::string_view rule, std::string msg, int line) {
    out.push_back({s, std::string(rule), std::move(msg), file, line});
  };

  if (!is_valid_pattern_id(doc.id)) {
    emit(Severity::error, rules::kInvalidId, "pattern id is empty or has whitespace",
         head);
  }

  const std::pair<std::string_view, const std::string*> clauses[] = {
      {"context", &doc.context},   {"if", &doc.if_clause},
      {"however", &doc.however_clause}, {"then", &doc.then_clause},
      {"because", &doc.because_clause}};
  for (const auto& [name, text] : clauses) {
    if (blank(*text)) {
      emit(Severity::error, rules::kRequiredFieldMissing,
           "required field '" + std::string(name) + "' is missing", head);
    }
  }

  const FieldPresence presence = field_presence(doc);
  if (!presence.has_next_steps) {
    if (mode == LintMode::strict) {
      emit(Severity::error, rules::kRequiredFieldMissing,
           "required field 'next-steps' is missing", head);
    } else {
      emit(Severity::warning, rules::kNextStepsMissing,
           "no next-steps; pattern classifies as :stub or :settled", head);
    }
  }
  if (!presence.has_evidence && mode == LintMode::lenient) {
    emit(Severity::warning, rules::kEvidenceMissing, "no evidence entries", head);
  }
  auto check_entries = [&](std::string_view name,
                           const std::vector<std::string>& entries) {
    for (const auto& e : entries) {
      if (blank(e)) {
        emit(Severity::error, rules::kEmptyListEntry,
             "empty '" + std::string(name) + "' entry", head);
      }
    }
  };
  check_entries("evidence", doc.evidence);
  check_entries("next-steps", doc.next_steps);

  // Ordering: first occurrence of each required field, in source order.
  std::vector<std::string> seen;
  int last_index = -1;
  bool order_reported = false;
  for (const auto& marker : doc.source.fields) {
    const int idx = canonical_index(marker.name);
    if (idx < 0) continue;
    if (std::find(seen.begin(), seen.end(), marker.name) != seen.end()) {
      if (marker.name != "next-steps") {
        emit(Severity::error, rules::kDuplicateField,
             "field '" + marker.name + "' appears more than once", marker.line);
      }
      continue;
    }
    seen.push_back(marker.name);
    if (idx < last_index && !order_reported) {
      emit(Severity::error, rules::kFieldOrder,
           "field '" + marker.name +
               "' is out of order; expected context, if, however, then, "
               "because, next-steps",
           marker.line);
      order_reported = true;
    }
    last_index = std::max(last_index, idx);
  }

  emit(Severity::info, rules::kSemanticUnverified,
       "not machine-checked: if/however must state a tension; because must "
       "give one primary rationale; next-steps must not resolve the tension",
       head);
  return out;
}

const PatternDocument* PatternLibrary::find(const PatternId& id) const {
  auto it = patterns.find(id);
  return it == patterns.end() ? nullptr : &it->second;
}

PatternLibrary load_library(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw Error(ErrorCode::io,
                "pattern library root is not a readable directory: " + root.string());
  }
  PatternLibrary lib;
  lib.root = root;

  std::vector<fs::path> files;
  fs::recursive_directory_iterator it(root, ec), end;
  if (ec) {
    throw Error(ErrorCode::io, "cannot read " + root.string() + ": " + ec.message());
  }
  for (; it != end; it.increment(ec)) {
    if (ec) {
      lib.diagnostics.push_back({Severity::error, std::string(rules::kIoUnreadable),
                                 ec.message(), root.string(), 1});
      break;
    }
    if (it->is_regular_file(ec) && it->path().extension() == kPatternExtension) {
      files.push_back(it->path());
    }
  }
  std::sort(files.begin(), files.end());

  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    if (in) buf << in.rdbuf();
    if (!in || in.bad()) {
      lib.diagnostics.push_back({Severity::error, std::string(rules::kIoUnreadable),
                                 "cannot read file", path.string(), 1});
      continue;
    }
    ParseResult result = parse_pattern(buf.str(), path.string());
    lib.diagnostics.insert(lib.diagnostics.end(), result.diagnostics.begin(),
                           result.diagnostics.end());
    if (!result.document) continue;
    PatternDocument& doc = *result.document;
    auto existing = lib.patterns.find(doc.id);
    if (existing != lib.patterns.end()) {
      lib.diagnostics.push_back(
          {Severity::error, std::string(rules::kDuplicateId),
           "id '" + doc.id + "' already defined in " + existing->second.source.path,
           path.string(), doc.source.first_line});
      continue;
    }
    PatternId id = doc.id;
    lib.patterns.emplace(std::move(id), std::move(doc));
  }
  return lib;
}

}  // namespace futon
