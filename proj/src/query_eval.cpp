#include "nbsearch/query_eval.hpp"

#include <cstdio>
#include <sstream>

#include "nbsearch/code_units.hpp"
#include "nbsearch/errors.hpp"
#include "nbsearch/notebook.hpp"

namespace nbsearch {

using nlohmann::json;

std::string_view to_string(QueryType t) noexcept {
  switch (t) {
    case QueryType::EQ: return "EQ";
    case QueryType::UDQ: return "UDQ";
    case QueryType::CSQ: return "CSQ";
  }
  return "EQ";
}

std::optional<QueryType> parse_query_type(std::string_view s) noexcept {
  if (s == "EQ") return QueryType::EQ;
  if (s == "UDQ") return QueryType::UDQ;
  if (s == "CSQ") return QueryType::CSQ;
  return std::nullopt;
}

std::string_view display_name(QueryType t) noexcept {
  switch (t) {
    case QueryType::EQ: return "Exact Query";
    case QueryType::UDQ: return "User Defined Query";
    case QueryType::CSQ: return "Code Summary Query";
  }
  return "";
}

std::string_view perspective(QueryType t) noexcept {
  switch (t) {
    case QueryType::EQ: return "Author";
    case QueryType::UDQ: return "Searcher";
    case QueryType::CSQ: return "Model";
  }
  return "";
}

CleanText clean_query_text(std::string_view text) {
  if (text.find('\n') != std::string_view::npos) return clean_code(text);
  CleanText as_markdown = clean_markdown(text);
  if (as_markdown.text == text) return as_markdown;
  try {
    extract_units(text);
  } catch (const SyntaxErrorInCell&) {
    return as_markdown;
  }
  return clean_code(text);
}

QueryOutcome run_query(const Query& query, const VectorStore& store, const ModelGateway& gateway) {
  if (store.size() == 0) throw EmptyStore("the index is empty");
  QueryOutcome out;
  if (query.qtype == QueryType::CSQ) {
    if (!query.target) throw UnknownTarget("CSQ requires a target chunk key");
    auto target = store.get(*query.target);
    if (!target) throw UnknownTarget("no stored chunk " + to_string(*query.target));
    if (target->cell_type != "code") throw UnknownTarget(to_string(*query.target) + " is not a code chunk");
    out.target = query.target;
    out.embedded_text = gateway.summarize_code(target->contents);
  } else {
    if (query.text.empty()) throw NoTokens("query text is empty");
    out.embedded_text = clean_query_text(query.text).text;
  }
  const auto vectors = gateway.embed_batch({out.embedded_text});
  out.hits = store.search(vectors.front(), query.k, query.filter);
  return out;
}

EvalReport evaluate(const std::vector<EvalQuery>& queries, const VectorStore& store, const ModelGateway& gateway) {
  EvalReport report;
  struct Acc {
    std::size_t count = 0;
    std::size_t with_hits = 0;
    double distance_sum = 0.0;
    std::size_t at1 = 0;
    std::size_t atk = 0;
  };
  std::array<Acc, 3> acc{};

  for (const EvalQuery& q : queries) {
    EvalQueryResult r;
    r.line = q.line;
    r.qtype = q.query.qtype;
    r.text = q.query.text;
    r.target = q.query.target;
    r.expected = q.expected;
    r.k = q.query.k;
    QueryOutcome outcome;
    try {
      outcome = run_query(q.query, store, gateway);
    } catch (const Error& e) {
      report.issues.push_back({q.line, e.what()});
      continue;
    }
    if (!outcome.hits.empty()) {
      r.rank1 = outcome.hits.front().object.key();
      r.rank1_distance = outcome.hits.front().distance;
      r.hit_at_1 = *r.rank1 == q.expected;
      for (const auto& h : outcome.hits) r.hit_at_k = r.hit_at_k || h.object.key() == q.expected;
    }
    Acc& a = acc[static_cast<std::size_t>(r.qtype)];
    ++a.count;
    if (r.rank1_distance) {
      ++a.with_hits;
      a.distance_sum += *r.rank1_distance;
    }
    a.at1 += r.hit_at_1 ? 1 : 0;
    a.atk += r.hit_at_k ? 1 : 0;
    report.queries.push_back(std::move(r));
  }

  for (std::size_t i = 0; i < 3; ++i) {
    EvalRow& row = report.rows[i];
    row.qtype = static_cast<QueryType>(i);
    row.query_count = acc[i].count;
    row.valid = acc[i].count > 0;
    if (!row.valid) continue;
    row.mean_distance_rank1 = acc[i].with_hits > 0 ? acc[i].distance_sum / static_cast<double>(acc[i].with_hits) : 0.0;
    row.recall_at_1 = static_cast<double>(acc[i].at1) / static_cast<double>(acc[i].count);
    row.recall_at_k = static_cast<double>(acc[i].atk) / static_cast<double>(acc[i].count);
  }
  return report;
}

std::string render_table(const EvalReport& report) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-20s %-12s %6s %9s %9s %9s\n", "Query Type", "Perspective", "Count", "Distance",
                "Recall@1", "Recall@k");
  out << buf;
  for (const EvalRow& row : report.rows) {
    const std::string name(display_name(row.qtype));
    const std::string persp(perspective(row.qtype));
    if (row.valid) {
      std::snprintf(buf, sizeof buf, "%-20s %-12s %6zu %9.3f %9.3f %9.3f\n", name.c_str(), persp.c_str(),
                    row.query_count, row.mean_distance_rank1, row.recall_at_1, row.recall_at_k);
    } else {
      std::snprintf(buf, sizeof buf, "%-20s %-12s %6zu %9s %9s %9s\n", name.c_str(), persp.c_str(), row.query_count,
                    "-", "-", "-");
    }
    out << buf;
  }
  return out.str();
}

json key_to_json(const ChunkKey& key) {
  return {{"notebook_id", key.notebook_id}, {"cell_index", key.cell_index}, {"unit_index", key.unit_index}};
}

ChunkKey key_from_json(const json& j) {
  try {
    return ChunkKey{j.at("notebook_id").get<std::string>(), j.at("cell_index").get<int>(),
                    j.at("unit_index").get<int>()};
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad chunk key: ") + e.what());
  }
}

json to_json(const EvalReport& report) {
  json rows = json::array();
  for (const EvalRow& row : report.rows) {
    rows.push_back({{"qtype", to_string(row.qtype)},
                    {"query_type", display_name(row.qtype)},
                    {"perspective", perspective(row.qtype)},
                    {"query_count", row.query_count},
                    {"mean_distance_rank1", row.mean_distance_rank1},
                    {"recall_at_1", row.recall_at_1},
                    {"recall_at_k", row.recall_at_k},
                    {"valid", row.valid}});
  }
  json queries = json::array();
  for (const auto& q : report.queries) {
    json item = {{"line", q.line},
                 {"qtype", to_string(q.qtype)},
                 {"text", q.text},
                 {"expected", key_to_json(q.expected)},
                 {"k", q.k},
                 {"hit_at_1", q.hit_at_1},
                 {"hit_at_k", q.hit_at_k}};
    item["target"] = q.target ? key_to_json(*q.target) : json(nullptr);
    item["rank1"] = q.rank1 ? key_to_json(*q.rank1) : json(nullptr);
    item["rank1_distance"] = q.rank1_distance ? json(*q.rank1_distance) : json(nullptr);
    queries.push_back(std::move(item));
  }
  json issues = json::array();
  for (const auto& i : report.issues) issues.push_back({{"line", i.line}, {"message", i.message}});
  return {{"rows", rows}, {"queries", queries}, {"issues", issues}};
}

ParsedQueryFile parse_query_lines(std::string_view content, std::size_t default_k) {
  ParsedQueryFile out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < content.size()) {
    auto nl = content.find('\n', start);
    if (nl == std::string_view::npos) nl = content.size();
    const std::string_view line = content.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const json j = json::parse(line);
      if (!j.is_object()) throw std::invalid_argument("line is not a JSON object");
      EvalQuery q;
      q.line = line_no;
      const auto qtype = parse_query_type(j.at("qtype").get<std::string>());
      if (!qtype) throw std::invalid_argument("qtype must be EQ, UDQ or CSQ");
      q.query.qtype = *qtype;
      if (j.contains("text") && !j["text"].is_null()) q.query.text = j["text"].get<std::string>();
      if (j.contains("target") && !j["target"].is_null()) q.query.target = key_from_json(j["target"]);
      q.query.k = j.contains("k") ? j["k"].get<std::size_t>() : default_k;
      if (q.query.k < 1) throw std::invalid_argument("k must be at least 1");
      q.expected = key_from_json(j.at("expected"));
      if (q.query.qtype == QueryType::CSQ && !q.query.target) throw std::invalid_argument("CSQ needs a target");
      if (q.query.qtype != QueryType::CSQ && q.query.text.empty()) {
        throw std::invalid_argument(std::string(to_string(q.query.qtype)) + " needs non-empty text");
      }
      out.queries.push_back(std::move(q));
    } catch (const std::exception& e) {
      out.issues.push_back({line_no, e.what()});
    }
  }
  return out;
}

ParsedQueryFile load_query_file(const std::filesystem::path& file, std::size_t default_k) {
  return parse_query_lines(read_file_bytes(file), default_k);
}

}  // namespace nbsearch
