#include "nbsearch/notebook.hpp"

#include <fcntl.h>
#include <pwd.h>
#include <sys/stat.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>

#include "nbsearch/errors.hpp"
#include "nbsearch/hash.hpp"

namespace nbsearch {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(CellKind kind) noexcept {
  return kind == CellKind::Markdown ? "markdown" : "code";
}

namespace {

std::string join_source(const json& source, std::string_view path, std::size_t cell_pos) {
  if (source.is_string()) return source.get<std::string>();
  if (source.is_array()) {
    std::string out;
    for (const auto& part : source) {
      if (!part.is_string()) {
        throw MalformedNotebook(std::string(path) + ": cell " + std::to_string(cell_pos) +
                                " has a non-string source fragment");
      }
      out += part.get_ref<const std::string&>();
    }
    return out;
  }
  throw MalformedNotebook(std::string(path) + ": cell " + std::to_string(cell_pos) +
                          " source is neither a string nor a list of strings");
}

std::string metadata_author(const json& doc) {
  auto meta = doc.find("metadata");
  if (meta == doc.end() || !meta->is_object()) return {};
  auto authors = meta->find("authors");
  if (authors == meta->end() || !authors->is_array() || authors->empty()) return {};
  const auto& first = authors->front();
  if (first.is_object()) {
    auto name = first.find("name");
    if (name != first.end() && name->is_string()) return name->get<std::string>();
  } else if (first.is_string()) {
    return first.get<std::string>();
  }
  return {};
}

}  // namespace

NotebookDocument parse_notebook(std::string_view raw_bytes, std::string_view path,
                                const FileMeta& fs_meta) {
  json doc;
  try {
    doc = json::parse(raw_bytes.begin(), raw_bytes.end());
  } catch (const json::parse_error& e) {
    throw MalformedNotebook(std::string(path) + ": not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw MalformedNotebook(std::string(path) + ": top level is not an object");
  if (doc.contains("worksheets") && !doc.contains("cells")) {
    throw MalformedNotebook(std::string(path) + ": nbformat v3 notebooks are not supported");
  }
  auto cells_it = doc.find("cells");
  if (cells_it == doc.end() || !cells_it->is_array()) {
    throw MalformedNotebook(std::string(path) + ": missing `cells` array");
  }

  NotebookDocument out;
  out.notebook_id = fs::path(std::string(path)).generic_string();
  if (out.notebook_id.empty()) throw MalformedNotebook("notebook path is empty");
  out.content_hash = fnv1a64(raw_bytes);
  out.created_at = fs_meta.created_at;
  out.modified_at = fs_meta.modified_at;
  out.author_name = metadata_author(doc);
  if (out.author_name.empty()) out.author_name = fs_meta.author_name;

  std::size_t pos = 0;
  for (const auto& cell : *cells_it) {
    if (!cell.is_object()) {
      throw MalformedNotebook(std::string(path) + ": cell " + std::to_string(pos) + " is not an object");
    }
    auto type_it = cell.find("cell_type");
    auto source_it = cell.find("source");
    if (type_it == cell.end() || !type_it->is_string() || source_it == cell.end()) {
      throw MalformedNotebook(std::string(path) + ": cell " + std::to_string(pos) +
                              " lacks cell_type or source");
    }
    const auto& type = type_it->get_ref<const std::string&>();
    // Validate source even for dropped cells so a broken file never half-indexes.
    std::string source = join_source(*source_it, path, pos);
    ++pos;
    CellKind kind;
    if (type == "markdown") {
      kind = CellKind::Markdown;
    } else if (type == "code") {
      kind = CellKind::Code;
    } else {
      continue;
    }
    out.cells.push_back(Cell{static_cast<int>(out.cells.size()), kind, std::move(source)});
  }
  return out;
}

bool glob_match(std::string_view pattern, std::string_view path) noexcept {
  if (pattern.empty()) return path.empty();
  if (pattern.substr(0, 3) == "**/") {
    // Zero directories, or consume one segment and retry.
    if (glob_match(pattern.substr(3), path)) return true;
    auto slash = path.find('/');
    return slash != std::string_view::npos && glob_match(pattern, path.substr(slash + 1));
  }
  if (pattern == "**") return true;
  const char p = pattern.front();
  if (p == '*') {
    for (std::size_t i = 0; i <= path.size(); ++i) {
      if (glob_match(pattern.substr(1), path.substr(i))) return true;
      if (i < path.size() && path[i] == '/') break;
    }
    return false;
  }
  if (path.empty()) return false;
  if (p == '?') return path.front() != '/' && glob_match(pattern.substr(1), path.substr(1));
  return p == path.front() && glob_match(pattern.substr(1), path.substr(1));
}

std::string read_file_bytes(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open " + file.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

FileMeta read_file_meta(const fs::path& file) {
  FileMeta meta;
  struct statx sx {};
  if (::statx(AT_FDCWD, file.c_str(), 0, STATX_MTIME | STATX_BTIME | STATX_UID, &sx) == 0) {
    meta.modified_at = static_cast<std::int64_t>(sx.stx_mtime.tv_sec);
    meta.created_at = meta.modified_at;
    if ((sx.stx_mask & STATX_BTIME) != 0) {
      // A copy that preserved mtime can have a birth time after its mtime.
      meta.created_at = std::min<std::int64_t>(sx.stx_btime.tv_sec, meta.modified_at);
    }
    if ((sx.stx_mask & STATX_UID) != 0) {
      if (const passwd* pw = ::getpwuid(sx.stx_uid); pw != nullptr && pw->pw_name != nullptr) {
        meta.author_name = pw->pw_name;
      }
    }
    return meta;
  }
  std::error_code ec;
  auto ftime = fs::last_write_time(file, ec);
  if (!ec) {
    auto sys = std::chrono::file_clock::to_sys(ftime);
    meta.modified_at = std::chrono::duration_cast<std::chrono::seconds>(sys.time_since_epoch()).count();
    meta.created_at = meta.modified_at;
  }
  return meta;
}

NotebookDocument load_notebook(const fs::path& root, std::string_view relative_path) {
  const fs::path full = root / fs::path(std::string(relative_path));
  const std::string bytes = read_file_bytes(full);
  return parse_notebook(bytes, relative_path, read_file_meta(full));
}

std::vector<ScannedFile> scan_repository(const fs::path& root, std::string_view glob) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw RootNotFound("repository root not found: " + root.string());

  std::vector<ScannedFile> out;
  fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec);
  if (ec) throw RootNotFound("cannot read repository root " + root.string() + ": " + ec.message());
  for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) break;
    const auto& entry = *it;
    const std::string name = entry.path().filename().string();
    if (entry.is_directory(ec)) {
      if (!name.empty() && name.front() == '.') it.disable_recursion_pending();
      continue;
    }
    if (!entry.is_regular_file(ec)) continue;
    const std::string rel = entry.path().lexically_relative(root).generic_string();
    if (!glob_match(glob, rel)) continue;
    ScannedFile f;
    f.path = rel;
    try {
      f.content_hash = fnv1a64(read_file_bytes(entry.path()));
    } catch (const Error&) {
      continue;  // vanished or unreadable between listing and reading
    }
    f.modified_at = read_file_meta(entry.path()).modified_at;
    out.push_back(std::move(f));
  }
  std::sort(out.begin(), out.end(),
            [](const ScannedFile& a, const ScannedFile& b) { return a.path < b.path; });
  return out;
}

}  // namespace nbsearch
