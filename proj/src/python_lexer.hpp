#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nbsearch::python {

struct Token {
  enum class Kind { Name, Number, String, Op };
  Kind kind = Kind::Op;
  std::string text;
  int line = 0;   // 1-based physical line where the token starts
  int depth = 0;  // bracket nesting depth in effect before the token
};

/// A Python logical line: one statement header or simple statement, possibly
/// spanning several physical lines through brackets, strings or backslashes.
struct LogicalLine {
  int first_line = 0;
  int last_line = 0;
  int indent = 0;  // tabs advance to the next multiple of 8
  std::vector<Token> tokens;
};

enum class LineState {
  StatementStart,  // the line begins a fresh logical line
  Continuation,    // inside brackets or after a trailing backslash
  InString,        // begins inside a multi-line string literal
};

struct LexError {
  std::string message;
  int line = 0;
};

struct LexOptions {
  // Treat statement-start lines whose first non-blank character is % or !
  // (IPython magics and shell escapes) as non-code.
  bool skip_magics = false;
  // Record the first error and keep going instead of stopping.
  bool lenient = false;
};

struct LexResult {
  std::vector<LogicalLine> lines;
  std::vector<LineState> line_states;  // index i describes physical line i+1
  std::vector<int> magic_lines;        // 1-based
  std::optional<LexError> error;
};

LexResult lex(std::string_view source, const LexOptions& options = {});

bool is_keyword(std::string_view word) noexcept;

}  // namespace nbsearch::python
