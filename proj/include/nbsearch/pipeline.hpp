#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nbsearch/chunker.hpp"
#include "nbsearch/model_gateway.hpp"
#include "nbsearch/notebook.hpp"
#include "nbsearch/vector_store.hpp"

namespace nbsearch {

struct NotebookChunks {
  std::vector<Chunk> chunks;
  std::size_t skipped_cells = 0;  // cells dropped because no summary could be produced
  std::vector<std::string> messages;
};

/// Cleans and plans every cell of doc. Over-budget units are summarized via
/// the gateway, with the unit head-truncated to the completion budget first.
NotebookChunks chunk_notebook(const NotebookDocument& doc, const TokenBudget& budget, const ModelGateway& gateway);

struct NotebookObjects {
  std::vector<StoredObject> objects;
  std::size_t skipped_cells = 0;
  std::vector<std::string> messages;
};

/// chunk_notebook followed by batched embedding. Gateway errors propagate.
NotebookObjects build_objects(const NotebookDocument& doc, const TokenBudget& budget, const ModelGateway& gateway);

inline constexpr std::size_t kEmbedBatchSize = 64;

}  // namespace nbsearch
