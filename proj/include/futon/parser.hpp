#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "futon/pattern.hpp"

namespace futon {

enum class Severity { error, warning, info };

const char* to_string(Severity s);

// Published diagnostic rule identifiers. Every error names one of these.
namespace rules {
inline constexpr std::string_view kMissingHeader = "missing-header";
inline constexpr std::string_view kDuplicateHeader = "duplicate-header";
inline constexpr std::string_view kInvalidId = "invalid-id";
inline constexpr std::string_view kDuplicateField = "duplicate-field";
inline constexpr std::string_view kUnterminatedField = "unterminated-field";
inline constexpr std::string_view kUnknownField = "unknown-field";
inline constexpr std::string_view kOrphanText = "orphan-text";
inline constexpr std::string_view kRequiredFieldMissing = "required-field-missing";
inline constexpr std::string_view kFieldOrder = "field-order";
inline constexpr std::string_view kEmptyListEntry = "empty-list-entry";
inline constexpr std::string_view kNextStepsMissing = "next-steps-missing";
inline constexpr std::string_view kEvidenceMissing = "evidence-missing";
inline constexpr std::string_view kSemanticUnverified = "semantic-unverified";
inline constexpr std::string_view kDuplicateId = "duplicate-id";
inline constexpr std::string_view kIoUnreadable = "io-unreadable";
}  // namespace rules

const std::vector<std::string_view>& published_rules();

struct ParseDiagnostic {
  Severity severity = Severity::error;
  std::string rule;
  std::string message;
  std::string file;
  int line = 0;
};

struct ParseResult {
  std::optional<PatternDocument> document;
  std::vector<ParseDiagnostic> diagnostics;

  bool ok() const { return document.has_value(); }
};

bool has_errors(const std::vector<ParseDiagnostic>& diagnostics);

// Canonical order of the required clause fields.
inline constexpr std::array<std::string_view, 6> kRequiredFieldOrder = {
    "context", "if", "however", "then", "because", "next-steps"};

inline constexpr std::string_view kPatternExtension = ".arg";

// Parses one pattern. A document is returned when no error diagnostics were
// produced; warnings may accompany it.
ParseResult parse_pattern(std::string_view text, const std::string& origin);

std::string serialize_pattern(const PatternDocument& doc);

enum class LintMode { strict, lenient };

std::vector<ParseDiagnostic> lint_pattern(const PatternDocument& doc,
                                          LintMode mode);

struct PatternLibrary {
  std::filesystem::path root;
  std::map<PatternId, PatternDocument> patterns;
  std::vector<ParseDiagnostic> diagnostics;

  const PatternDocument* find(const PatternId& id) const;
};

// Loads every `.arg` file under root (recursively, in path order). Per-file
// problems become diagnostics; an unreadable root throws Error(io).
PatternLibrary load_library(const std::filesystem::path& root);

}  // namespace futon
