#include "nbsearch/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <string_view>
#include <vector>

#include "python_lexer.hpp"

namespace nbsearch {

namespace {

constexpr std::string_view kDeletedChars = "{}`\"'!";

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

std::string erase_chars(std::string_view s, std::string_view chars) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (chars.find(c) == std::string_view::npos) out.push_back(c);
  }
  return out;
}

// [anchor](target) -> anchor
std::string rewrite_links(std::string_view s, std::size_t& count) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '[') {
      const auto close = s.find(']', i + 1);
      if (close != std::string_view::npos && close + 1 < s.size() && s[close + 1] == '(') {
        int depth = 0;
        std::size_t j = close + 1;
        for (; j < s.size(); ++j) {
          if (s[j] == '(') ++depth;
          if (s[j] == ')' && --depth == 0) break;
        }
        if (j < s.size()) {
          out.append(s.substr(i + 1, close - i - 1));
          ++count;
          i = j + 1;
          continue;
        }
      }
    }
    out.push_back(s[i]);
    ++i;
  }
  return out;
}

bool starts_with_url(std::string_view s, std::size_t i) {
  for (std::string_view scheme : {"http://", "https://"}) {
    if (i + scheme.size() > s.size()) continue;
    bool match = true;
    for (std::size_t k = 0; k < scheme.size(); ++k) {
      if (std::tolower(static_cast<unsigned char>(s[i + k])) != scheme[k]) {
        match = false;
        break;
      }
    }
    if (match) return true;
  }
  return false;
}

// Drops every http(s):// occurrence through the end of its whitespace token.
std::string drop_bare_urls(std::string_view s, std::size_t& count) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (starts_with_url(s, i)) {
      while (i < s.size() && !is_ws(s[i])) ++i;
      ++count;
      continue;
    }
    out.push_back(s[i]);
    ++i;
  }
  return out;
}

std::string drop_heading_markers(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool line_start = true;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (line_start && c == '#') continue;
    if (c == '\n') {
      line_start = true;
    } else if (c != ' ' && c != '\t') {
      line_start = false;
    }
    out.push_back(c);
  }
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_ws(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string markdown_pass(std::string_view s, std::size_t& urls) {
  std::string t = erase_chars(s, kDeletedChars);
  t = rewrite_links(t, urls);
  t = drop_bare_urls(t, urls);
  t = erase_chars(t, ":");
  t = drop_heading_markers(t);
  return collapse_whitespace(t);
}

std::string_view rstrip(std::string_view line) {
  while (!line.empty() && is_ws(line.back())) line.remove_suffix(1);
  return line;
}

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto nl = s.find('\n', start);
    if (nl == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, nl - start));
    start = nl + 1;
  }
}

}  // namespace

CleanText clean_markdown(std::string_view source) {
  CleanText out;
  std::string current(source);
  // Deleting characters can expose a new link; iterate to the fixpoint so the
  // result is stable under re-cleaning. Each changing pass shrinks the text.
  while (true) {
    std::string next = markdown_pass(current, out.removed_url_count);
    if (next == current) break;
    current = std::move(next);
  }
  out.text = std::move(current);
  return out;
}

CleanText clean_code(std::string_view source) {
  std::string stripped;
  stripped.reserve(source.size());
  {
    const auto lines = split_lines(source);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (i > 0) stripped.push_back('\n');
      stripped.append(rstrip(lines[i]));
    }
  }

  python::LexOptions opts;
  opts.skip_magics = true;
  opts.lenient = true;
  const python::LexResult lexed = python::lex(stripped, opts);
  const auto lines = split_lines(stripped);

  struct Kept {
    std::string_view text;
    bool blank;
  };
  std::vector<Kept> kept;
  std::size_t magic_idx = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int lineno = static_cast<int>(i) + 1;
    if (magic_idx < lexed.magic_lines.size() && lexed.magic_lines[magic_idx] == lineno) {
      ++magic_idx;
      continue;
    }
    const bool in_string =
        i < lexed.line_states.size() && lexed.line_states[i] == python::LineState::InString;
    kept.push_back({lines[i], lines[i].empty() && !in_string});
  }

  std::vector<std::string_view> out_lines;
  for (std::size_t i = 0; i < kept.size();) {
    if (!kept[i].blank) {
      out_lines.push_back(kept[i].text);
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < kept.size() && kept[j].blank) ++j;
    const std::size_t run = j - i;
    const std::size_t keep = run >= 3 ? 1 : run;
    for (std::size_t k = 0; k < keep; ++k) out_lines.emplace_back();
    i = j;
  }
  auto first = std::find_if(out_lines.begin(), out_lines.end(), [](auto l) { return !l.empty(); });
  auto last = std::find_if(out_lines.rbegin(), out_lines.rend(), [](auto l) { return !l.empty(); }).base();

  CleanText out;
  for (auto it = first; it < last; ++it) {
    if (it != first) out.text.push_back('\n');
    out.text.append(*it);
  }
  return out;
}

}  // namespace nbsearch
