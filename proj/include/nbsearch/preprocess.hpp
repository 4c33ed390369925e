#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace nbsearch {

struct CleanText {
  std::string text;
  std::size_t removed_url_count = 0;

  bool operator==(const CleanText&) const = default;
};

/// Markdown cell normalization: links keep their anchor text, bare URLs are
/// dropped, the characters { } : ` " ' ! and heading markers are deleted and
/// all whitespace collapses to single spaces. Idempotent.
CleanText clean_markdown(std::string_view source);

/// Code cell normalization: trailing whitespace is stripped, IPython magic and
/// shell-escape lines are dropped, runs of three or more blank lines shrink to
/// one and leading/trailing blank lines are trimmed. Everything else is kept
/// verbatim. Idempotent.
CleanText clean_code(std::string_view source);

}  // namespace nbsearch
