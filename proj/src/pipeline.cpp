#include "nbsearch/pipeline.hpp"

#include <algorithm>

#include "nbsearch/errors.hpp"

namespace nbsearch {

NotebookChunks chunk_notebook(const NotebookDocument& doc, const TokenBudget& budget, const ModelGateway& gateway) {
  const auto estimator = estimator_for(budget.estimator_id);
  const std::size_t completion_budget = gateway.config().completion_max_tokens;
  const SummarizeFn summarize = [&](std::string_view code) -> std::string {
    try {
      return gateway.summarize_code(estimator->truncate(code, completion_budget));
    } catch (const ProviderError& e) {
      throw SummarizerUnavailable(e.what());
    } catch (const ConfigError& e) {
      throw SummarizerUnavailable(e.what());
    }
  };

  NotebookChunks out;
  for (const Cell& cell : doc.cells) {
    try {
      auto chunks = plan_chunks(doc.notebook_id, cell, clean_cell(cell), budget, *estimator, summarize);
      std::move(chunks.begin(), chunks.end(), std::back_inserter(out.chunks));
    } catch (const SummarizerUnavailable& e) {
      ++out.skipped_cells;
      out.messages.push_back(doc.notebook_id + ": cell " + std::to_string(cell.cell_index) +
                             " skipped: " + e.what());
    }
  }
  return out;
}

NotebookObjects build_objects(const NotebookDocument& doc, const TokenBudget& budget, const ModelGateway& gateway) {
  NotebookChunks planned = chunk_notebook(doc, budget, gateway);
  NotebookObjects out;
  out.skipped_cells = planned.skipped_cells;
  out.messages = std::move(planned.messages);
  out.objects.reserve(planned.chunks.size());

  for (std::size_t begin = 0; begin < planned.chunks.size(); begin += kEmbedBatchSize) {
    const std::size_t end = std::min(planned.chunks.size(), begin + kEmbedBatchSize);
    std::vector<std::string> texts;
    for (std::size_t i = begin; i < end; ++i) texts.push_back(planned.chunks[i].embed_text);
    auto vectors = gateway.embed_batch(texts);
    for (std::size_t i = begin; i < end; ++i) {
      Chunk& c = planned.chunks[i];
      StoredObject o;
      o.notebook_id = doc.notebook_id;
      o.contents = std::move(c.contents);
      o.cell_type = std::string(cell_type_name(c.cell_kind));
      o.author_name = doc.author_name;
      o.modified_at = doc.modified_at;
      o.created_at = doc.created_at;
      o.vector = std::move(vectors[i - begin]);
      o.cell_index = c.cell_index;
      o.unit_index = c.unit_index;
      o.chunk_kind = std::string(to_string(c.kind));
      out.objects.push_back(std::move(o));
    }
  }
  return out;
}

}  // namespace nbsearch
