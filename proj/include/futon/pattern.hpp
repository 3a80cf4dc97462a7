#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace futon {

using PatternId = std::string;

enum class HeaderKind { arg, flexiarg };

const char* to_string(HeaderKind kind);

struct FieldMarker {
  std::string name;
  int line = 0;
};

// Where a document came from. Not part of document equality.
struct SourceInfo {
  std::string path;
  int first_line = 0;
  int last_line = 0;
  // `+` field markers in source order. Lint checks ordering against this;
  // serialization always writes canonical order.
  std::vector<FieldMarker> fields;
};

struct PatternDocument {
  PatternId id;
  HeaderKind header = HeaderKind::arg;
  // `@key value` header lines, e.g. title, audience, tone, style.
  std::map<std::string, std::string> metadata;
  // `! key: value` lines other than `! conclusion:`, e.g. instantiated-by.
  std::map<std::string, std::string> annotations;
  std::string summary;
  std::string context;
  std::string if_clause;
  std::string however_clause;
  std::string then_clause;
  std::string because_clause;
  std::vector<std::string> evidence;
  std::vector<std::string> next_steps;
  SourceInfo source;

  std::optional<std::string> title() const;

  // Content equality; source location is ignored.
  friend bool operator==(const PatternDocument& a, const PatternDocument& b);
};

enum class Maturity { stub, greenfield, active, settled };

inline constexpr std::array<Maturity, 4> kAllMaturities = {
    Maturity::stub, Maturity::greenfield, Maturity::active, Maturity::settled};

const char* to_string(Maturity m);
std::optional<Maturity> maturity_from_string(std::string_view text);

struct MaturityState {
  Maturity state = Maturity::stub;
  double precision_prior = 0.2;

  friend bool operator==(const MaturityState&, const MaturityState&) = default;
};

struct FieldPresence {
  bool has_next_steps = false;
  bool has_evidence = false;
};

// A list counts as present when at least one entry has non-whitespace text.
FieldPresence field_presence(const PatternDocument& doc);

double precision_prior(Maturity state);

MaturityState classify_maturity(FieldPresence presence);
MaturityState classify_maturity(const PatternDocument& doc);

bool is_valid_pattern_id(std::string_view id);

}  // namespace futon
