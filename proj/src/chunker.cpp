#include "nbsearch/chunker.hpp"

#include <array>
#include <stdexcept>

#include "nbsearch/code_units.hpp"
#include "nbsearch/errors.hpp"

namespace nbsearch {

namespace {

constexpr std::array<std::string_view, 6> kChunkKindNames = {"WholeCell", "ClassUnit", "FunctionUnit",
                                                             "Residue",   "Summary",   "Truncated"};

ChunkKind kind_for(UnitKind kind) {
  switch (kind) {
    case UnitKind::Class: return ChunkKind::ClassUnit;
    case UnitKind::Function: return ChunkKind::FunctionUnit;
    case UnitKind::Residue: return ChunkKind::Residue;
  }
  return ChunkKind::Residue;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\v\f");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\v\f");
  return std::string(s.substr(first, last - first + 1));
}

// Paragraphs of the raw markdown, separated by whitespace-only lines.
std::vector<std::string> paragraphs(std::string_view source) {
  std::vector<std::string> out;
  std::string current;
  std::size_t start = 0;
  while (start <= source.size()) {
    auto nl = source.find('\n', start);
    if (nl == std::string_view::npos) nl = source.size();
    const std::string_view line = source.substr(start, nl - start);
    if (line.find_first_not_of(" \t\r\v\f") == std::string_view::npos) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      if (!current.empty()) current.push_back('\n');
      current.append(line);
    }
    start = nl + 1;
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

class Planner {
 public:
  Planner(std::string_view notebook_id, const Cell& cell, const TokenBudget& budget,
          const TokenEstimator& estimator)
      : notebook_id_(notebook_id), cell_(cell), budget_(budget.max_tokens), estimator_(estimator) {}

  void emit(ChunkKind kind, std::string contents, std::string embed_text) {
    if (trim(contents).empty()) return;
    Chunk c;
    c.notebook_id = std::string(notebook_id_);
    c.cell_index = cell_.cell_index;
    c.unit_index = static_cast<int>(out_.size());
    c.kind = kind;
    c.cell_kind = cell_.kind;
    c.token_count = estimator_.count(embed_text);
    c.contents = std::move(contents);
    c.embed_text = std::move(embed_text);
    out_.push_back(std::move(c));
  }

  void emit_plain(ChunkKind kind, std::string text) {
    std::string copy = text;
    emit(kind, std::move(text), std::move(copy));
  }

  void emit_truncated(std::string_view text) { emit_plain(ChunkKind::Truncated, estimator_.truncate(text, budget_)); }

  bool fits(std::string_view text) const { return estimator_.count(text) <= budget_; }

  void plan_markdown() {
    std::string packed;
    std::size_t packed_tokens = 0;
    auto flush = [&] {
      if (!packed.empty()) emit_plain(ChunkKind::WholeCell, std::move(packed));
      packed.clear();
      packed_tokens = 0;
    };
    for (const auto& para : paragraphs(cell_.source)) {
      std::string text = clean_markdown(para).text;
      if (text.empty()) continue;
      const std::size_t tokens = estimator_.count(text);
      if (tokens > budget_) {
        flush();
        emit_truncated(text);
        continue;
      }
      if (!packed.empty() && packed_tokens + tokens > budget_) flush();
      if (!packed.empty()) packed.push_back(' ');
      packed += text;
      packed_tokens += tokens;
    }
    flush();
  }

  void plan_code(const std::string& cleaned, const SummarizeFn& summarize) {
    std::vector<CodeUnit> units;
    try {
      units = extract_units(cleaned);
    } catch (const SyntaxErrorInCell&) {
      emit_truncated(cleaned);
      return;
    }
    if (units.empty()) {
      // Comments only: nothing to split, keep the head of the cell.
      emit_truncated(cleaned);
      return;
    }
    for (auto& unit : units) {
      if (fits(unit.source)) {
        emit_plain(kind_for(unit.kind), std::move(unit.source));
        continue;
      }
      std::string summary;
      try {
        summary = trim(summarize(unit.source));
      } catch (const SummarizerUnavailable&) {
        throw;
      } catch (const std::exception& e) {
        throw SummarizerUnavailable(std::string("summarizer failed: ") + e.what());
      }
      if (estimator_.count(summary) == 0) {
        emit_truncated(unit.source);
        continue;
      }
      if (!fits(summary)) summary = estimator_.truncate(summary, budget_);
      emit(ChunkKind::Summary, std::move(unit.source), std::move(summary));
    }
  }

  std::vector<Chunk> take() { return std::move(out_); }

 private:
  std::string_view notebook_id_;
  const Cell& cell_;
  std::size_t budget_;
  const TokenEstimator& estimator_;
  std::vector<Chunk> out_;
};

}  // namespace

std::string_view to_string(ChunkKind kind) noexcept { return kChunkKindNames[static_cast<std::size_t>(kind)]; }

ChunkKind chunk_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kChunkKindNames.size(); ++i) {
    if (kChunkKindNames[i] == name) return static_cast<ChunkKind>(i);
  }
  throw std::invalid_argument("unknown chunk kind: " + std::string(name));
}

std::string_view cell_type_name(CellKind kind) noexcept { return kind == CellKind::Markdown ? "text" : "code"; }

CleanText clean_cell(const Cell& cell) {
  return cell.kind == CellKind::Markdown ? clean_markdown(cell.source) : clean_code(cell.source);
}

std::vector<Chunk> plan_chunks(std::string_view notebook_id, const Cell& cell, const CleanText& cleaned,
                               const TokenBudget& budget, const TokenEstimator& estimator,
                               const SummarizeFn& summarize) {
  if (budget.max_tokens == 0) throw ConfigError("token budget must be at least 1");
  Planner planner(notebook_id, cell, budget, estimator);
  if (planner.fits(cleaned.text)) {
    planner.emit_plain(ChunkKind::WholeCell, cleaned.text);
  } else if (cell.kind == CellKind::Markdown) {
    planner.plan_markdown();
  } else {
    planner.plan_code(cleaned.text, summarize);
  }
  return planner.take();
}

std::vector<Chunk> plan_chunks(std::string_view notebook_id, const Cell& cell, const CleanText& cleaned,
                               const TokenBudget& budget, const SummarizeFn& summarize) {
  return plan_chunks(notebook_id, cell, cleaned, budget, *estimator_for(budget.estimator_id), summarize);
}

}  // namespace nbsearch
