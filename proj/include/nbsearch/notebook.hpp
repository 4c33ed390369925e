#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nbsearch {

enum class CellKind { Markdown, Code };

std::string_view to_string(CellKind kind) noexcept;

struct Cell {
  int cell_index = 0;
  CellKind kind = CellKind::Code;
  std::string source;

  bool operator==(const Cell&) const = default;
};

/// Filesystem facts that do not live inside the notebook JSON.
struct FileMeta {
  std::int64_t created_at = 0;
  std::int64_t modified_at = 0;
  std::string author_name;
};

struct NotebookDocument {
  std::string notebook_id;  // repository-relative, '/'-separated
  std::vector<Cell> cells;
  std::string author_name;
  std::int64_t created_at = 0;
  std::int64_t modified_at = 0;
  std::uint64_t content_hash = 0;

  bool operator==(const NotebookDocument&) const = default;
};

/// Parses nbformat v4 JSON. Only markdown and code cells survive; outputs and
/// execution metadata are dropped. Throws MalformedNotebook.
NotebookDocument parse_notebook(std::string_view raw_bytes, std::string_view path,
                                const FileMeta& fs_meta);

struct ScannedFile {
  std::string path;  // relative to the scan root, '/'-separated
  std::int64_t modified_at = 0;
  std::uint64_t content_hash = 0;
};

inline constexpr std::string_view kDefaultNotebookGlob = "**/*.ipynb";

/// Lists files under root matching glob in lexicographic path order. Hidden
/// directories (including .ipynb_checkpoints) are not descended into.
/// Throws RootNotFound.
std::vector<ScannedFile> scan_repository(const std::filesystem::path& root,
                                         std::string_view glob = kDefaultNotebookGlob);

/// Glob match over '/'-separated relative paths. `*` and `?` stay within one
/// path segment; `**/` matches zero or more whole directories.
bool glob_match(std::string_view pattern, std::string_view path) noexcept;

/// Timestamps and owner name for a file, best effort.
FileMeta read_file_meta(const std::filesystem::path& file);

std::string read_file_bytes(const std::filesystem::path& file);

/// Reads and parses root/relative_path, filling FileMeta from the filesystem.
NotebookDocument load_notebook(const std::filesystem::path& root, std::string_view relative_path);

}  // namespace nbsearch
