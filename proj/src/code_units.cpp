#include "nbsearch/code_units.hpp"

#include <algorithm>
#include <optional>

#include "nbsearch/errors.hpp"
#include "python_lexer.hpp"

namespace nbsearch {

using python::LogicalLine;
using python::Token;

std::string_view to_string(UnitKind kind) noexcept {
  switch (kind) {
    case UnitKind::Class: return "ClassUnit";
    case UnitKind::Function: return "FunctionUnit";
    case UnitKind::Residue: return "Residue";
  }
  return "Residue";
}

namespace {

enum class StmtKind { Simple, Compound, Function, Class };

// Which clause may legally follow a compound statement at the same level.
enum class Chain { None, If, Loop, Try, TryExcept, TryElse };

struct Stmt {
  StmtKind kind = StmtKind::Simple;
  std::string name;
  int first_line = 0;
  int last_line = 0;
};

bool is_name(const Token& t, std::string_view text) {
  return t.kind == Token::Kind::Name && t.text == text;
}
bool is_op(const Token& t, std::string_view text) {
  return t.kind == Token::Kind::Op && t.text == text;
}

[[noreturn]] void syntax_error(const std::string& message, int line) {
  throw SyntaxErrorInCell(message, line);
}

class BlockParser {
 public:
  explicit BlockParser(const std::vector<LogicalLine>& lines) : lines_(lines) {}

  std::vector<Stmt> parse_module() {
    if (lines_.empty()) return {};
    if (lines_.front().indent != 0) syntax_error("unexpected indent", lines_.front().first_line);
    std::vector<Stmt> top = parse_block(0);
    if (pos_ < lines_.size()) {
      syntax_error("unindent does not match any outer indentation level", lines_[pos_].first_line);
    }
    return top;
  }

 private:
  // Parses sibling statements at `indent`. Returns when a line dedents.
  std::vector<Stmt> parse_block(int indent) {
    std::vector<Stmt> out;
    Chain chain = Chain::None;
    while (pos_ < lines_.size()) {
      const LogicalLine& line = lines_[pos_];
      if (line.indent < indent) break;
      if (line.indent > indent) syntax_error("unexpected indent", line.first_line);

      const Token& head = line.tokens.front();
      const std::string clause = head.kind == Token::Kind::Name ? head.text : std::string();
      if (clause == "elif" || clause == "else" || clause == "except" || clause == "finally") {
        chain = continue_chain(chain, clause, line);
        Stmt body = parse_compound(indent, StmtKind::Compound);
        out.back().last_line = body.last_line;
        continue;
      }
      if (chain == Chain::Try) syntax_error("expected 'except' or 'finally' block", line.first_line);
      chain = Chain::None;
      out.push_back(parse_statement(indent, chain));
    }
    if (chain == Chain::Try) {
      const int at = pos_ < lines_.size() ? lines_[pos_].first_line : out.back().last_line;
      syntax_error("expected 'except' or 'finally' block", at);
    }
    return out;
  }

  Chain continue_chain(Chain chain, const std::string& clause, const LogicalLine& line) {
    if (clause == "elif" && chain == Chain::If) return Chain::If;
    if (clause == "else") {
      if (chain == Chain::If || chain == Chain::Loop) return Chain::None;
      if (chain == Chain::TryExcept) return Chain::TryElse;
    }
    if (clause == "except" && (chain == Chain::Try || chain == Chain::TryExcept)) return Chain::TryExcept;
    if (clause == "finally" && (chain == Chain::Try || chain == Chain::TryExcept || chain == Chain::TryElse)) {
      return Chain::None;
    }
    syntax_error("invalid syntax: unexpected '" + clause + "'", line.first_line);
  }

  Stmt parse_statement(int indent, Chain& chain) {
    const LogicalLine& line = lines_[pos_];
    const auto& toks = line.tokens;
    const Token& head = toks.front();

    if (is_op(head, "@")) {
      const int first = line.first_line;
      while (pos_ < lines_.size() && lines_[pos_].indent == indent && is_op(lines_[pos_].tokens.front(), "@")) {
        if (lines_[pos_].tokens.size() < 2) syntax_error("invalid syntax", lines_[pos_].first_line);
        ++pos_;
      }
      if (pos_ >= lines_.size() || lines_[pos_].indent != indent) {
        syntax_error("decorator must precede a function or class definition", first);
      }
      const auto& next = lines_[pos_].tokens;
      const bool is_def = is_name(next[0], "def") || (is_name(next[0], "async") && next.size() > 1 &&
                                                      is_name(next[1], "def"));
      if (!is_def && !is_name(next[0], "class")) {
        syntax_error("decorator must precede a function or class definition", lines_[pos_].first_line);
      }
      Chain ignored = Chain::None;
      Stmt s = parse_statement(indent, ignored);
      s.first_line = first;
      return s;
    }

    std::size_t k = 0;
    if (is_name(head, "async") && toks.size() > 1 &&
        (is_name(toks[1], "def") || is_name(toks[1], "for") || is_name(toks[1], "with"))) {
      k = 1;
    }
    const Token& kw = toks[k];
    if (is_name(kw, "def")) return parse_def(indent, k);
    if (is_name(kw, "class")) return parse_class(indent);
    if (kw.kind == Token::Kind::Name &&
        (kw.text == "if" || kw.text == "for" || kw.text == "while" || kw.text == "try" || kw.text == "with")) {
      if (kw.text == "if") chain = Chain::If;
      if (kw.text == "for" || kw.text == "while") chain = Chain::Loop;
      if (kw.text == "try") chain = Chain::Try;
      return parse_compound(indent, StmtKind::Compound);
    }
    if ((is_name(head, "match") || is_name(head, "case")) && toks.size() > 2 && is_op(toks.back(), ":") &&
        toks.back().depth == 0 && !is_op(toks[1], "=") && !is_op(toks[1], ".")) {
      return parse_compound(indent, StmtKind::Compound);
    }
    return parse_simple();
  }

  Stmt parse_simple() {
    const LogicalLine& line = lines_[pos_];
    const Token& last = line.tokens.back();
    if (is_op(last, ":") && last.depth == 0) syntax_error("invalid syntax", line.first_line);
    if (is_name(line.tokens.front(), "def") || is_name(line.tokens.front(), "class")) {
      syntax_error("invalid syntax", line.first_line);
    }
    ++pos_;
    return Stmt{StmtKind::Simple, {}, line.first_line, line.last_line};
  }

  // Index of the first depth-0 ':' at or after `from`, if any.
  static std::optional<std::size_t> header_colon(const LogicalLine& line, std::size_t from) {
    for (std::size_t i = from; i < line.tokens.size(); ++i) {
      if (is_op(line.tokens[i], ":") && line.tokens[i].depth == 0) return i;
    }
    return std::nullopt;
  }

  // Finds the token closing the bracket opened at `open`.
  static std::optional<std::size_t> matching_close(const LogicalLine& line, std::size_t open) {
    const int depth = line.tokens[open].depth;
    for (std::size_t i = open + 1; i < line.tokens.size(); ++i) {
      const Token& t = line.tokens[i];
      if (t.kind == Token::Kind::Op && t.depth == depth && (t.text == ")" || t.text == "]" || t.text == "}")) {
        return i;
      }
    }
    return std::nullopt;
  }

  static std::string expect_name(const LogicalLine& line, std::size_t idx) {
    if (idx >= line.tokens.size() || line.tokens[idx].kind != Token::Kind::Name ||
        python::is_keyword(line.tokens[idx].text)) {
      syntax_error("invalid syntax: expected a name", line.first_line);
    }
    return line.tokens[idx].text;
  }

  Stmt parse_def(int indent, std::size_t def_idx) {
    const LogicalLine& line = lines_[pos_];
    std::string name = expect_name(line, def_idx + 1);
    std::size_t i = def_idx + 2;
    if (i < line.tokens.size() && is_op(line.tokens[i], "[")) {
      auto close = matching_close(line, i);
      if (!close) syntax_error("invalid syntax", line.first_line);
      i = *close + 1;
    }
    if (i >= line.tokens.size() || !is_op(line.tokens[i], "(")) {
      syntax_error("invalid syntax: expected '('", line.first_line);
    }
    auto close = matching_close(line, i);
    if (!close) syntax_error("invalid syntax", line.first_line);
    i = *close + 1;
    if (i < line.tokens.size() && is_op(line.tokens[i], "->")) {
      if (i + 1 >= line.tokens.size() || is_op(line.tokens[i + 1], ":")) syntax_error("invalid syntax", line.first_line);
      i += 2;
    } else if (i >= line.tokens.size() || !is_op(line.tokens[i], ":")) {
      syntax_error("expected ':'", line.first_line);
    }
    Stmt s = parse_compound(indent, StmtKind::Function, i);
    s.name = std::move(name);
    return s;
  }

  Stmt parse_class(int indent) {
    const LogicalLine& line = lines_[pos_];
    std::string name = expect_name(line, 1);
    std::size_t i = 2;
    for (std::string_view open : {"[", "("}) {
      if (i < line.tokens.size() && is_op(line.tokens[i], open)) {
        auto close = matching_close(line, i);
        if (!close) syntax_error("invalid syntax", line.first_line);
        i = *close + 1;
      }
    }
    if (i >= line.tokens.size() || !is_op(line.tokens[i], ":")) syntax_error("expected ':'", line.first_line);
    Stmt s = parse_compound(indent, StmtKind::Class, i);
    s.name = std::move(name);
    return s;
  }

  // Header plus either an inline simple body or an indented block.
  Stmt parse_compound(int indent, StmtKind kind, std::size_t colon_from = 1) {
    const LogicalLine& line = lines_[pos_];
    auto colon = header_colon(line, colon_from);
    if (!colon) syntax_error("expected ':'", line.first_line);
    Stmt s{kind, {}, line.first_line, line.last_line};
    ++pos_;
    if (*colon + 1 < line.tokens.size()) {
      const Token& inline_head = line.tokens[*colon + 1];
      for (std::string_view bad : {"if", "for", "while", "try", "with", "def", "class", "elif", "else", "except",
                                   "finally"}) {
        if (is_name(inline_head, bad)) syntax_error("invalid syntax", line.first_line);
      }
      return s;
    }
    if (pos_ >= lines_.size() || lines_[pos_].indent <= indent) {
      syntax_error("expected an indented block", line.first_line);
    }
    const int body_indent = lines_[pos_].indent;
    std::vector<Stmt> body = parse_block(body_indent);
    s.last_line = body.back().last_line;
    if (pos_ < lines_.size() && lines_[pos_].indent > indent && lines_[pos_].indent < body_indent) {
      syntax_error("unindent does not match any outer indentation level", lines_[pos_].first_line);
    }
    return s;
  }

  const std::vector<LogicalLine>& lines_;
  std::size_t pos_ = 0;
};

std::vector<std::string> split_lines(std::string_view code) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto nl = code.find('\n', start);
    if (nl == std::string_view::npos) {
      out.emplace_back(code.substr(start));
      break;
    }
    out.emplace_back(code.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

std::string join_span(const std::vector<std::string>& lines, LineSpan span) {
  std::string out;
  for (int l = span.start; l <= span.end; ++l) {
    if (l > span.start) out.push_back('\n');
    out += lines[static_cast<std::size_t>(l - 1)];
  }
  return out;
}

}  // namespace

std::vector<CodeUnit> extract_units(std::string_view code) {
  python::LexResult lexed = python::lex(code);
  if (lexed.error) throw SyntaxErrorInCell(lexed.error->message, lexed.error->line);
  const std::vector<Stmt> top = BlockParser(lexed.lines).parse_module();
  const std::vector<std::string> lines = split_lines(code);

  std::vector<CodeUnit> units;
  CodeUnit residue{UnitKind::Residue, "<residue>", {}, {}};
  for (const Stmt& s : top) {
    const LineSpan span{s.first_line, s.last_line};
    if (s.kind == StmtKind::Function || s.kind == StmtKind::Class) {
      units.push_back(CodeUnit{s.kind == StmtKind::Class ? UnitKind::Class : UnitKind::Function, s.name,
                               join_span(lines, span), {span}});
      continue;
    }
    // Statements joined by ';' share a logical line, so spans never repeat.
    if (!residue.spans.empty() && residue.spans.back().end + 1 == span.start) {
      residue.spans.back().end = span.end;
    } else {
      residue.spans.push_back(span);
    }
  }
  if (!residue.spans.empty()) {
    for (std::size_t i = 0; i < residue.spans.size(); ++i) {
      if (i > 0) residue.source.push_back('\n');
      residue.source += join_span(lines, residue.spans[i]);
    }
    units.push_back(std::move(residue));
  }
  return units;
}

std::vector<std::string> definition_names(std::string_view code, std::size_t limit) {
  python::LexOptions opts;
  opts.lenient = true;
  opts.skip_magics = true;
  const python::LexResult lexed = python::lex(code, opts);
  std::vector<std::string> names;
  for (const auto& line : lexed.lines) {
    for (std::size_t i = 0; i + 1 < line.tokens.size() && names.size() < limit; ++i) {
      if ((is_name(line.tokens[i], "def") || is_name(line.tokens[i], "class")) &&
          line.tokens[i + 1].kind == Token::Kind::Name) {
        names.push_back(line.tokens[i + 1].text);
      }
    }
  }
  return names;
}

}  // namespace nbsearch
