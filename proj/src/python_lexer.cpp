#include "python_lexer.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace nbsearch::python {

namespace {

constexpr std::array<std::string_view, 35> kKeywords = {
    "False", "None",   "True",    "and",      "as",       "assert", "async",
    "await", "break",  "class",   "continue", "def",      "del",    "elif",
    "else",  "except", "finally", "for",      "from",     "global", "if",
    "import", "in",    "is",      "lambda",   "nonlocal", "not",    "or",
    "pass",  "raise",  "return",  "try",      "while",    "with",   "yield"};

// Longest first within each length class.
constexpr std::array<std::string_view, 47> kOperators = {
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", ">>", "<<", "<=",
    ">=",  "==",  "!=",  "+=",  "-=",  "*=", "/=", "%=", "&=", "|=", "^=", "@=",
    "+",   "-",   "*",   "/",   "%",   "@",  "&",  "|",  "^",  "~",  "<",  ">",
    "(",   ")",   "[",   "]",   "{",   "}",  ",",  ":",  ";",  ".",  "="};

bool is_ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool is_ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

bool is_string_prefix(std::string_view word) {
  if (word.size() > 2) return false;
  std::string lower;
  for (char c : word) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  static constexpr std::array<std::string_view, 11> kPrefixes = {
      "r", "u", "b", "f", "t", "br", "rb", "fr", "rf", "tr", "rt"};
  return std::find(kPrefixes.begin(), kPrefixes.end(), lower) != kPrefixes.end();
}

char closing_for(char open) {
  switch (open) {
    case '(': return ')';
    case '[': return ']';
    default: return '}';
  }
}

class Lexer {
 public:
  Lexer(std::string_view src, const LexOptions& opts) : src_(src), opts_(opts) {}

  LexResult run() {
    result_.line_states.push_back(LineState::StatementStart);
    while (pos_ < src_.size() && !stopped_) {
      if (!in_logical_) {
        begin_physical_line();
        continue;
      }
      scan_token();
    }
    if (!stopped_) {
      if (!brackets_.empty()) {
        fail(std::string("'") + brackets_.back().first + "' was never closed", brackets_.back().second);
      } else if (continuation_pending_) {
        fail("unexpected EOF after line continuation", line_);
      }
    }
    if (in_logical_ && !current_.tokens.empty()) finish_logical();
    // A trailing newline opens a phantom empty line; drop its state entry.
    if (!src_.empty() && src_.back() == '\n') result_.line_states.pop_back();
    if (src_.empty()) result_.line_states.clear();
    return std::move(result_);
  }

 private:
  bool at_end() const { return pos_ >= src_.size(); }
  char peek(std::size_t off = 0) const { return pos_ + off < src_.size() ? src_[pos_ + off] : '\0'; }

  void fail(const std::string& message, int line) {
    if (!result_.error) result_.error = LexError{message, line};
    if (!opts_.lenient) stopped_ = true;
  }

  bool at_newline() const { return peek() == '\n' || (peek() == '\r' && peek(1) == '\n'); }

  void consume_newline(LineState next_state) {
    pos_ += peek() == '\r' ? 2 : 1;
    ++line_;
    result_.line_states.push_back(next_state);
  }

  void skip_to_eol() {
    while (!at_end() && !at_newline()) ++pos_;
  }

  // Called at the start of a physical line when no logical line is open.
  void begin_physical_line() {
    int col = 0;
    while (!at_end()) {
      char c = peek();
      if (c == ' ') {
        ++col;
      } else if (c == '\t') {
        col = (col / 8 + 1) * 8;
      } else if (c == '\f') {
        col = 0;
      } else if (c == '\r' && peek(1) != '\n') {
        // stray carriage return counts as whitespace
      } else {
        break;
      }
      ++pos_;
    }
    if (at_end()) return;
    char c = peek();
    if (at_newline()) {
      consume_newline(LineState::StatementStart);
      return;
    }
    if (c == '#') {
      skip_to_eol();
      if (!at_end()) consume_newline(LineState::StatementStart);
      return;
    }
    if (opts_.skip_magics && (c == '%' || c == '!')) {
      result_.magic_lines.push_back(line_);
      skip_to_eol();
      if (!at_end()) consume_newline(LineState::StatementStart);
      return;
    }
    in_logical_ = true;
    current_ = LogicalLine{};
    current_.first_line = line_;
    current_.last_line = line_;
    current_.indent = col;
  }

  void finish_logical() {
    result_.lines.push_back(std::move(current_));
    current_ = LogicalLine{};
    in_logical_ = false;
  }

  void push_token(Token::Kind kind, std::size_t begin, int line) {
    Token t;
    t.kind = kind;
    t.text = std::string(src_.substr(begin, pos_ - begin));
    t.line = line;
    t.depth = static_cast<int>(brackets_.size());
    current_.tokens.push_back(std::move(t));
    current_.last_line = line_;
    continuation_pending_ = false;
  }

  void scan_token() {
    char c = peek();
    if (c == ' ' || c == '\t' || c == '\f' || (c == '\r' && peek(1) != '\n')) {
      ++pos_;
      return;
    }
    if (c == '#') {
      skip_to_eol();
      return;
    }
    if (at_newline()) {
      if (brackets_.empty() && !continuation_pending_) {
        finish_logical();
        consume_newline(LineState::StatementStart);
      } else {
        consume_newline(LineState::Continuation);
      }
      continuation_pending_ = false;
      return;
    }
    if (c == '\\') {
      ++pos_;
      if (at_end()) {
        fail("unexpected EOF after line continuation", line_);
        return;
      }
      if (!at_newline()) {
        fail("unexpected character after line continuation character", line_);
        return;
      }
      consume_newline(LineState::Continuation);
      continuation_pending_ = true;
      return;
    }
    continuation_pending_ = false;
    const unsigned char uc = static_cast<unsigned char>(c);
    if (c == '"' || c == '\'') {
      scan_string(pos_, pos_);
      return;
    }
    if (is_ident_start(uc)) {
      const std::size_t begin = pos_;
      while (!at_end() && is_ident_char(static_cast<unsigned char>(peek()))) ++pos_;
      if ((peek() == '"' || peek() == '\'') && is_string_prefix(src_.substr(begin, pos_ - begin))) {
        scan_string(begin, pos_);
        return;
      }
      push_token(Token::Kind::Name, begin, line_);
      return;
    }
    if (std::isdigit(uc) || (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      scan_number();
      return;
    }
    for (std::string_view op : kOperators) {
      if (src_.substr(pos_, op.size()) == op) {
        const std::size_t begin = pos_;
        const int depth_before = static_cast<int>(brackets_.size());
        pos_ += op.size();
        if (op == "(" || op == "[" || op == "{") {
          brackets_.emplace_back(op[0], line_);
        } else if (op == ")" || op == "]" || op == "}") {
          if (brackets_.empty()) {
            fail(std::string("unmatched '") + op[0] + "'", line_);
            return;
          }
          if (closing_for(brackets_.back().first) != op[0]) {
            fail(std::string("closing parenthesis '") + op[0] + "' does not match opening parenthesis '" +
                     brackets_.back().first + "'",
                 line_);
            return;
          }
          brackets_.pop_back();
        }
        push_token(Token::Kind::Op, begin, line_);
        current_.tokens.back().depth = std::min(depth_before, static_cast<int>(brackets_.size()));
        return;
      }
    }
    fail(std::string("invalid character '") + c + "'", line_);
    ++pos_;
  }

  void scan_number() {
    const std::size_t begin = pos_;
    const bool hex = peek() == '0' && (peek(1) == 'x' || peek(1) == 'X');
    while (!at_end()) {
      char c = peek();
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
        ++pos_;
        if (!hex && (c == 'e' || c == 'E') && (peek() == '+' || peek() == '-')) ++pos_;
      } else {
        break;
      }
    }
    push_token(Token::Kind::Number, begin, line_);
  }

  // pos_ points at the opening quote; begin is where the prefix starts.
  void scan_string(std::size_t begin, std::size_t quote_pos) {
    const int start_line = line_;
    std::string prefix;
    for (std::size_t i = begin; i < quote_pos; ++i) {
      prefix.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(src_[i]))));
    }
    const bool formatted = prefix.find('f') != std::string::npos || prefix.find('t') != std::string::npos;
    pos_ = quote_pos;
    scan_string_body(formatted);
    push_token(Token::Kind::String, begin, start_line);
  }

  // pos_ at the opening quote. Leaves pos_ after the closing quote.
  void scan_string_body(bool formatted) {
    const char quote = peek();
    const bool triple = peek(1) == quote && peek(2) == quote;
    const int start_line = line_;
    pos_ += triple ? 3 : 1;
    while (true) {
      if (at_end()) {
        fail(triple ? "unterminated triple-quoted string literal" : "unterminated string literal", start_line);
        return;
      }
      char c = peek();
      if (c == '\\') {
        ++pos_;
        if (at_end()) continue;
        if (at_newline()) {
          consume_newline(LineState::InString);
        } else {
          ++pos_;
        }
        continue;
      }
      if (at_newline()) {
        if (!triple) {
          fail("unterminated string literal", start_line);
          return;  // lenient: the string ends at end of line
        }
        consume_newline(LineState::InString);
        continue;
      }
      if (c == quote) {
        if (!triple) {
          ++pos_;
          return;
        }
        if (peek(1) == quote && peek(2) == quote) {
          pos_ += 3;
          return;
        }
      }
      if (formatted && c == '{') {
        if (peek(1) == '{') {
          pos_ += 2;
          continue;
        }
        ++pos_;
        scan_replacement_field(triple);
        continue;
      }
      ++pos_;
    }
  }

  // Inside an f-string after '{'. Consumes through the matching '}'.
  void scan_replacement_field(bool triple) {
    int depth = 0;
    while (!at_end()) {
      char c = peek();
      if (c == '"' || c == '\'') {
        scan_string_body(false);
        if (stopped_) return;
        continue;
      }
      if (at_newline()) {
        if (!triple && depth == 0) return;  // let the enclosing string report it
        consume_newline(LineState::InString);
        continue;
      }
      if (c == '{' || c == '(' || c == '[') ++depth;
      if (c == ')' || c == ']') --depth;
      if (c == '}') {
        if (depth == 0) {
          ++pos_;
          return;
        }
        --depth;
      }
      ++pos_;
    }
  }

  std::string_view src_;
  LexOptions opts_;
  LexResult result_;
  std::size_t pos_ = 0;
  int line_ = 1;
  bool in_logical_ = false;
  bool continuation_pending_ = false;
  bool stopped_ = false;
  LogicalLine current_;
  std::vector<std::pair<char, int>> brackets_;
};

}  // namespace

bool is_keyword(std::string_view word) noexcept {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

LexResult lex(std::string_view source, const LexOptions& options) {
  return Lexer(source, options).run();
}

}  // namespace nbsearch::python
