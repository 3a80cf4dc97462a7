#include "futon/pattern.hpp"

#include <algorithm>
#include <cctype>

namespace futon {

namespace {

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

bool any_non_blank(const std::vector<std::string>& entries) {
  return std::any_of(entries.begin(), entries.end(),
                     [](const std::string& e) { return !blank(e); });
}

}  // namespace

const char* to_string(HeaderKind kind) {
  return kind == HeaderKind::flexiarg ? "flexiarg" : "arg";
}

std::optional<std::string> PatternDocument::title() const {
  auto it = metadata.find("title");
  if (it == metadata.end()) return std::nullopt;
  return it->second;
}

bool operator==(const PatternDocument& a, const PatternDocument& b) {
  return a.id == b.id && a.header == b.header && a.metadata == b.metadata &&
         a.annotations == b.annotations && a.summary == b.summary &&
         a.context == b.context && a.if_clause == b.if_clause &&
         a.however_clause == b.however_clause &&
         a.then_clause == b.then_clause &&
         a.because_clause == b.because_clause && a.evidence == b.evidence &&
         a.next_steps == b.next_steps;
}

const char* to_string(Maturity m) {
  switch (m) {
    case Maturity::stub:
      return "stub";
    case Maturity::greenfield:
      return "greenfield";
    case Maturity::active:
      return "active";
    case Maturity::settled:
      return "settled";
  }
  return "stub";
}

std::optional<Maturity> maturity_from_string(std::string_view text) {
  if (!text.empty() && text.front() == ':') text.remove_prefix(1);
  for (Maturity m : kAllMaturities) {
    if (text == to_string(m)) return m;
  }
  return std::nullopt;
}

FieldPresence field_presence(const PatternDocument& doc) {
  return {any_non_blank(doc.next_steps), any_non_blank(doc.evidence)};
}

double precision_prior(Maturity state) {
  switch (state) {
    case Maturity::stub:
      return 0.2;
    case Maturity::greenfield:
      return 0.4;
    case Maturity::active:
      return 0.8;
    case Maturity::settled:
      return 0.9;
  }
  return 0.2;
}

MaturityState classify_maturity(FieldPresence presence) {
  Maturity m;
  if (presence.has_next_steps) {
    m = presence.has_evidence ? Maturity::active : Maturity::greenfield;
  } else {
    m = presence.has_evidence ? Maturity::settled : Maturity::stub;
  }
  return {m, precision_prior(m)};
}

MaturityState classify_maturity(const PatternDocument& doc) {
  return classify_maturity(field_presence(doc));
}

bool is_valid_pattern_id(std::string_view id) {
  if (id.empty()) return false;
  return std::none_of(id.begin(), id.end(),
                      [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace futon
