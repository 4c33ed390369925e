#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nbsearch/model_gateway.hpp"
#include "nbsearch/preprocess.hpp"
#include "nbsearch/vector_store.hpp"

namespace nbsearch {

/// Exact query, user-defined query, code summary query.
enum class QueryType { EQ, UDQ, CSQ };

std::string_view to_string(QueryType t) noexcept;
std::optional<QueryType> parse_query_type(std::string_view s) noexcept;

struct Query {
  QueryType qtype = QueryType::UDQ;
  std::string text;               // EQ and UDQ
  std::optional<ChunkKey> target; // CSQ: stored code chunk to summarize
  std::size_t k = 5;
  SearchFilter filter;
};

struct QueryOutcome {
  std::string embedded_text;  // cleaned query text, or the generated summary for CSQ
  std::optional<ChunkKey> target;
  std::vector<SearchHit> hits;
};

/// Cleaner choice for free-text queries. Text with a newline is code. A
/// single line already stable under the markdown cleaner is left as is;
/// otherwise it is treated as code when it lexes and block-parses as Python
/// and as markdown when it does not.
CleanText clean_query_text(std::string_view text);

/// Throws EmptyStore, UnknownTarget, NoTokens and gateway errors.
QueryOutcome run_query(const Query& query, const VectorStore& store, const ModelGateway& gateway);

struct EvalQuery {
  Query query;
  ChunkKey expected;
  std::size_t line = 0;  // 1-based line in the query file, 0 if not from a file
};

struct EvalRow {
  QueryType qtype = QueryType::EQ;
  std::size_t query_count = 0;
  double mean_distance_rank1 = 0.0;
  double recall_at_1 = 0.0;
  double recall_at_k = 0.0;
  bool valid = false;  // false when no query of this type was evaluated
};

struct EvalQueryResult {
  std::size_t line = 0;
  QueryType qtype = QueryType::EQ;
  std::string text;
  std::optional<ChunkKey> target;
  ChunkKey expected;
  std::size_t k = 0;
  std::optional<ChunkKey> rank1;
  std::optional<double> rank1_distance;
  bool hit_at_1 = false;
  bool hit_at_k = false;
};

struct EvalIssue {
  std::size_t line = 0;
  std::string message;
};

struct EvalReport {
  std::array<EvalRow, 3> rows;  // EQ, UDQ, CSQ
  std::vector<EvalQueryResult> queries;
  std::vector<EvalIssue> issues;
};

/// Runs every query and aggregates per type. Per-query failures are recorded
/// as issues and excluded from the rows.
EvalReport evaluate(const std::vector<EvalQuery>& queries, const VectorStore& store, const ModelGateway& gateway);

/// Perspective label shown beside each query type.
std::string_view perspective(QueryType t) noexcept;
std::string_view display_name(QueryType t) noexcept;

/// Aligned text table: type, perspective, count, mean rank-1 distance,
/// recall@1, recall@k.
std::string render_table(const EvalReport& report);
nlohmann::json to_json(const EvalReport& report);

struct ParsedQueryFile {
  std::vector<EvalQuery> queries;
  std::vector<EvalIssue> issues;
};

/// JSON lines: {"qtype", "text", "target", "expected", "k"}. Malformed lines
/// become issues; the rest are returned.
ParsedQueryFile parse_query_lines(std::string_view content, std::size_t default_k);
ParsedQueryFile load_query_file(const std::filesystem::path& file, std::size_t default_k);

nlohmann::json key_to_json(const ChunkKey& key);
/// Throws std::invalid_argument.
ChunkKey key_from_json(const nlohmann::json& j);

}  // namespace nbsearch
