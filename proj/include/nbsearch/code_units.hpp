#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace nbsearch {

enum class UnitKind { Class, Function, Residue };

std::string_view to_string(UnitKind kind) noexcept;

/// Inclusive, 1-based physical line range.
struct LineSpan {
  int start = 0;
  int end = 0;

  bool operator==(const LineSpan&) const = default;
};

struct CodeUnit {
  UnitKind kind = UnitKind::Residue;
  std::string name;  // identifier, or "<residue>"
  std::string source;
  // One span for classes and functions. The residue collects every top-level
  // statement outside them, so it may cover several disjoint spans.
  std::vector<LineSpan> spans;
};

/// Splits Python source into top-level classes and functions (decorators
/// included, nested definitions left inside their parent) followed by one
/// residue unit holding all other top-level statements. Comment-only lines
/// outside any unit are not part of any unit.
///
/// Validation is lexical plus block structure: brackets, strings, indentation,
/// compound-statement headers and clause ordering. Expression grammar is not
/// checked. Throws SyntaxErrorInCell.
std::vector<CodeUnit> extract_units(std::string_view code);

/// Names following every `def` or `class` keyword, at any depth, in source
/// order. Tolerates invalid code; strings and comments are skipped.
std::vector<std::string> definition_names(std::string_view code, std::size_t limit);

}  // namespace nbsearch
