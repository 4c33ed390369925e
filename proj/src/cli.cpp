#include "nbsearch/cli.hpp"

#include <atomic>
#include <csignal>
#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <thread>

#include "nbsearch/config.hpp"
#include "nbsearch/errors.hpp"
#include "nbsearch/model_gateway.hpp"
#include "nbsearch/query_eval.hpp"
#include "nbsearch/sync.hpp"
#include "nbsearch/vector_store.hpp"

namespace nbsearch {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kPreviewChars = 120;

std::atomic<bool> g_stop{false};

extern "C" void handle_stop_signal(int) { g_stop.store(true); }

struct GlobalOptions {
  std::string config_path;
  std::string repo;
  std::string index;
  bool offline = false;
  bool json_output = false;
};

AppConfig resolve_config(const GlobalOptions& g) {
  AppConfig cfg = g.config_path.empty() ? AppConfig{} : load_app_config(g.config_path);
  if (!g.repo.empty()) cfg.repo_root = g.repo;
  if (!g.index.empty()) cfg.index_dir = fs::absolute(g.index);
  if (g.offline) cfg.model.offline_mode = true;
  cfg.validate();
  return cfg;
}

// Loads the index, retrying briefly in case a writer is mid-save.
std::optional<VectorStore> load_store(const fs::path& dir, std::string& why) {
  for (int attempt = 0; attempt < 3; ++attempt) {
    try {
      return VectorStore::load(dir);
    } catch (const CorruptIndex& e) {
      why = e.what();
      if (!fs::exists(dir / "manifest.json")) return std::nullopt;
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
  }
  return std::nullopt;
}

void check_model(const VectorStore& store, const ModelGateway& gateway) {
  if (store.size() > 0 && store.model_id() != gateway.embedding_model_id()) {
    throw ConfigError("index was built with embedding model `" + store.model_id() + "` but `" +
                      gateway.embedding_model_id() + "` is configured");
  }
}

std::string preview(std::string_view contents) {
  std::string flat;
  bool space = false;
  for (char c : contents) {
    if (c == ' ' || c == '\n' || c == '\t' || c == '\r') {
      space = !flat.empty();
      continue;
    }
    if (space) flat.push_back(' ');
    space = false;
    flat.push_back(c);
  }
  if (flat.size() <= kPreviewChars) return flat;
  std::size_t cut = kPreviewChars;
  while (cut > 0 && (static_cast<unsigned char>(flat[cut]) & 0xC0) == 0x80) --cut;
  return flat.substr(0, cut);
}

json hits_to_json(const std::vector<SearchHit>& hits) {
  json arr = json::array();
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const StoredObject& o = hits[i].object;
    arr.push_back({{"rank", i + 1},
                   {"distance", hits[i].distance},
                   {"notebook_id", o.notebook_id},
                   {"cell_index", o.cell_index},
                   {"unit_index", o.unit_index},
                   {"chunk_kind", o.chunk_kind},
                   {"cell_type", o.cell_type},
                   {"author_name", o.author_name},
                   {"contents", o.contents}});
  }
  return arr;
}

void print_hits(std::ostream& out, const std::vector<SearchHit>& hits) {
  char buf[64];
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const StoredObject& o = hits[i].object;
    std::snprintf(buf, sizeof buf, "%zu  %.4f  ", i + 1, hits[i].distance);
    out << buf << o.notebook_id << "  " << o.cell_index << '/' << o.unit_index << "  " << o.chunk_kind << "  "
        << preview(o.contents) << '\n';
  }
}

struct QueryOptions {
  std::string text;
  std::string type = "UDQ";
  std::string target;
  std::size_t k = 0;
  bool repl = false;
  std::string cell_type;
  std::string notebook_prefix;
};

Query build_query(const QueryOptions& opts, QueryType qtype, const std::string& text, std::size_t k) {
  Query q;
  q.qtype = qtype;
  q.k = k;
  if (!opts.cell_type.empty()) q.filter.cell_type = opts.cell_type;
  if (!opts.notebook_prefix.empty()) q.filter.notebook_prefix = opts.notebook_prefix;
  if (qtype == QueryType::CSQ) {
    const std::string& key = opts.target.empty() ? text : opts.target;
    q.target = parse_chunk_key(key);
    if (!q.target) throw UnknownTarget("target must look like notebook:cell:unit, got `" + key + "`");
  } else {
    q.text = text;
  }
  return q;
}

void emit_query_result(std::ostream& out, const Query& q, const QueryOutcome& outcome, bool as_json) {
  if (as_json) {
    json j = {{"qtype", to_string(q.qtype)},
              {"query", q.text},
              {"embedded_text", outcome.embedded_text},
              {"k", q.k},
              {"hits", hits_to_json(outcome.hits)}};
    j["target"] = outcome.target ? key_to_json(*outcome.target) : json(nullptr);
    out << j.dump() << '\n';
  } else {
    print_hits(out, outcome.hits);
  }
}

int cmd_index(const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  const AppConfig cfg = resolve_config(g);
  const ModelGateway gateway(cfg.model);
  const IndexSummary s = index_repository(cfg, gateway);
  for (const auto& m : s.messages) err << m << '\n';
  if (g.json_output) {
    out << json{{"notebooks", s.notebooks}, {"chunks", s.chunks}, {"skipped", s.skipped}, {"errors", s.errors}}.dump()
        << '\n';
  } else {
    out << "indexed " << s.notebooks << " notebooks, " << s.chunks << " chunks (skipped " << s.skipped
        << ", errors " << s.errors << ")\n";
  }
  return kExitOk;
}

int cmd_sync(const GlobalOptions& g, bool once, int interval, std::ostream& out, std::ostream& err) {
  AppConfig cfg = resolve_config(g);
  if (interval > 0) cfg.sync_interval_s = interval;
  cfg.validate();
  auto gateway = std::make_shared<const ModelGateway>(cfg.model);
  if (!fs::exists(cfg.resolved_index_dir() / "manifest.json")) {
    const IndexSummary s = index_repository(cfg, *gateway);
    for (const auto& m : s.messages) err << m << '\n';
    err << "no index found, built one with " << s.chunks << " chunks\n";
  }
  SyncEngine engine(cfg, gateway);
  if (once) {
    const CycleSummary s = engine.run_cycle();
    for (const auto& m : s.messages) err << m << '\n';
    if (g.json_output) {
      out << json{{"added", s.added}, {"updated", s.updated}, {"removed", s.removed}, {"errors", s.errors},
                  {"store_writes", s.store_writes}}
                 .dump()
          << '\n';
    } else {
      out << "sync: added " << s.added << ", updated " << s.updated << ", removed " << s.removed << ", errors "
          << s.errors << '\n';
    }
    return kExitOk;
  }
  g_stop.store(false);
  std::signal(SIGINT, handle_stop_signal);
  std::signal(SIGTERM, handle_stop_signal);
  engine.run(false, out, g_stop);
  return kExitOk;
}

int cmd_query(const GlobalOptions& g, const QueryOptions& opts, std::ostream& out, std::ostream& err,
              std::istream& in) {
  const AppConfig cfg = resolve_config(g);
  const auto qtype = parse_query_type(opts.type);
  if (!qtype) throw ConfigError("--type must be EQ, UDQ or CSQ");
  std::string why;
  auto store = load_store(cfg.resolved_index_dir(), why);
  if (!store) {
    err << "no index at " << cfg.resolved_index_dir().string() << ": " << why << '\n';
    return kExitEmptyStore;
  }
  if (store->size() == 0) {
    err << "the index at " << cfg.resolved_index_dir().string() << " is empty\n";
    return kExitEmptyStore;
  }
  const ModelGateway gateway(cfg.model);
  check_model(*store, gateway);
  const std::size_t k = opts.k > 0 ? opts.k : cfg.k_default;

  if (!opts.repl) {
    if (opts.text.empty() && (*qtype != QueryType::CSQ || opts.target.empty())) {
      throw ConfigError(*qtype == QueryType::CSQ ? "CSQ needs --target" : "query text is required");
    }
    const Query q = build_query(opts, *qtype, opts.text, k);
    emit_query_result(out, q, run_query(q, *store, gateway), g.json_output);
    return kExitOk;
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == ":quit" || line == ":q") break;
    try {
      const Query q = build_query(opts, *qtype, line, k);
      emit_query_result(out, q, run_query(q, *store, gateway), g.json_output);
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
    }
    out.flush();
  }
  return kExitOk;
}

fs::path report_path_for(const fs::path& queries_file) {
  fs::path p = queries_file;
  p.replace_extension(".report.json");
  return p;
}

int cmd_eval(const GlobalOptions& g, const std::string& file, std::ostream& out, std::ostream& err) {
  const AppConfig cfg = resolve_config(g);
  std::string why;
  auto store = load_store(cfg.resolved_index_dir(), why);
  if (!store || store->size() == 0) {
    err << "no usable index at " << cfg.resolved_index_dir().string() << (why.empty() ? "" : ": " + why) << '\n';
    return kExitEmptyStore;
  }
  const ModelGateway gateway(cfg.model);
  check_model(*store, gateway);
  ParsedQueryFile parsed = load_query_file(file, cfg.k_default);
  for (const auto& issue : parsed.issues) err << file << ':' << issue.line << ": " << issue.message << '\n';
  EvalReport report = evaluate(parsed.queries, *store, gateway);
  for (const auto& issue : report.issues) err << file << ':' << issue.line << ": " << issue.message << '\n';
  report.issues.insert(report.issues.begin(), parsed.issues.begin(), parsed.issues.end());

  const json j = to_json(report);
  const fs::path report_file = report_path_for(file);
  std::ofstream rf(report_file, std::ios::trunc);
  if (!rf) throw Error("cannot write " + report_file.string());
  rf << j.dump(2) << '\n';
  if (g.json_output) {
    out << j.dump() << '\n';
  } else {
    out << render_table(report);
    out << "report written to " << report_file.string() << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in) {
  CLI::App app{"Semantic search over Jupyter notebook repositories", "nbsearch"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "JSON config file");
  app.add_option("--repo", g.repo, "Repository root (overrides config)");
  app.add_option("--index", g.index, "Index directory (overrides config)");
  app.add_flag("--offline", g.offline, "Use the deterministic offline embedder and summarizer");
  app.add_flag("--json", g.json_output, "Machine-readable output");

  auto* index_cmd = app.add_subcommand("index", "Build the index from scratch");

  bool once = false;
  int interval = 0;
  auto* sync_cmd = app.add_subcommand("sync", "Keep the index in step with the repository");
  sync_cmd->add_flag("--once", once, "Run a single cycle");
  sync_cmd->add_option("--interval", interval, "Seconds between cycles")->check(CLI::PositiveNumber);

  QueryOptions qopts;
  auto* query_cmd = app.add_subcommand("query", "Search the index");
  query_cmd->add_option("text", qopts.text, "Query text (or target key for CSQ)");
  query_cmd->add_option("--type", qopts.type, "EQ, UDQ or CSQ")->check(CLI::IsMember({"EQ", "UDQ", "CSQ"}));
  query_cmd->add_option("--target", qopts.target, "CSQ target as notebook:cell:unit");
  query_cmd->add_option("-k", qopts.k, "Number of hits")->check(CLI::PositiveNumber);
  query_cmd->add_flag("--repl", qopts.repl, "Read one query per line from stdin");
  query_cmd->add_option("--cell-type", qopts.cell_type, "Only text or code chunks")
      ->check(CLI::IsMember({"text", "code"}));
  query_cmd->add_option("--notebook-prefix", qopts.notebook_prefix, "Only notebooks under this path prefix");

  std::string eval_file;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a query set");
  eval_cmd->add_option("file", eval_file, "JSON lines query file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitFatal;
  }

  try {
    if (index_cmd->parsed()) return cmd_index(g, out, err);
    if (sync_cmd->parsed()) return cmd_sync(g, once, interval, out, err);
    if (query_cmd->parsed()) return cmd_query(g, qopts, out, err, in);
    if (eval_cmd->parsed()) return cmd_eval(g, eval_file, out, err);
  } catch (const EmptyStore& e) {
    err << "error: " << e.what() << '\n';
    return kExitEmptyStore;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFatal;
  }
  return kExitFatal;
}

}  // namespace nbsearch
