#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "nbsearch/notebook.hpp"
#include "nbsearch/preprocess.hpp"
#include "nbsearch/tokens.hpp"

namespace nbsearch {

inline constexpr std::size_t kDefaultTokenBudget = 8191;

struct TokenBudget {
  std::size_t max_tokens = kDefaultTokenBudget;
  std::string estimator_id = std::string(kHeuristicEstimatorId);
};

enum class ChunkKind { WholeCell, ClassUnit, FunctionUnit, Residue, Summary, Truncated };

std::string_view to_string(ChunkKind kind) noexcept;
/// Inverse of to_string. Throws std::invalid_argument.
ChunkKind chunk_kind_from_string(std::string_view name);

/// Stored cell type names: markdown cells are "text".
std::string_view cell_type_name(CellKind kind) noexcept;

struct Chunk {
  std::string notebook_id;
  int cell_index = 0;
  int unit_index = 0;
  ChunkKind kind = ChunkKind::WholeCell;
  std::string contents;    // what retrieval returns
  std::string embed_text;  // what gets embedded; differs only for Summary
  CellKind cell_kind = CellKind::Code;
  std::size_t token_count = 0;

  bool operator==(const Chunk&) const = default;
};

/// Produces the summary text for one over-budget code unit. Expected to throw
/// SummarizerUnavailable when no summary can be produced.
using SummarizeFn = std::function<std::string(std::string_view code)>;

/// Dispatches to clean_markdown or clean_code by cell kind.
CleanText clean_cell(const Cell& cell);

/// Splits one cleaned cell into chunks that each fit the budget: the whole
/// cell when it fits; otherwise markdown is packed by paragraph and code is
/// split into top-level classes, functions and residue, summarizing units
/// that still do not fit. Unparseable code is head-truncated.
std::vector<Chunk> plan_chunks(std::string_view notebook_id, const Cell& cell, const CleanText& cleaned,
                               const TokenBudget& budget, const TokenEstimator& estimator,
                               const SummarizeFn& summarize);

/// Same, resolving the estimator from budget.estimator_id.
std::vector<Chunk> plan_chunks(std::string_view notebook_id, const Cell& cell, const CleanText& cleaned,
                               const TokenBudget& budget, const SummarizeFn& summarize);

}  // namespace nbsearch
