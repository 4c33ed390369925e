#include <doctest.h>

#include <atomic>
#include <json.hpp>
#include <sstream>

#include "nbsearch/config.hpp"
#include "nbsearch/embedding.hpp"
#include "nbsearch/errors.hpp"
#include "nbsearch/sync.hpp"
#include "test_support.hpp"

using namespace nbsearch;
using nbsearch::testing::notebook_json;
using nbsearch::testing::read_file;
using nbsearch::testing::TempDir;
using nbsearch::testing::write_file;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Provider double: deterministic 8-dim embeddings, fixed summaries, and a
// switch that makes every request fail with 503.
class FakeProvider : public HttpTransport {
 public:
  HttpResponse post_json(const std::string&, const HttpHeaders&, const std::string& body) override {
    if (fail) return {503, "unavailable", ""};
    const json req = json::parse(body);
    if (req.contains("input")) {
      json data = json::array();
      for (std::size_t i = 0; i < req["input"].size(); ++i) {
        data.push_back({{"index", i}, {"embedding", deterministic_embed(req["input"][i].get<std::string>(), 8).values}});
      }
      return {200, json{{"data", data}}.dump(), ""};
    }
    return {200, json{{"choices", {{{"message", {{"content", "fake summary"}}}}}}}.dump(), ""};
  }
  std::atomic<bool> fail{false};
};

struct Repo {
  TempDir tmp;
  AppConfig config;

  Repo() {
    fs::create_directories(tmp / "repo");
    config.repo_root = tmp / "repo";
    config.index_dir = tmp / "index";
    config.model.offline_mode = true;
  }

  void put(const std::string& rel, const std::string& contents) const { write_file(tmp / ("repo/" + rel), contents); }
  void remove(const std::string& rel) const { fs::remove(tmp / ("repo/" + rel)); }
  void touch(const std::string& rel) const {
    const auto p = tmp / ("repo/" + rel);
    fs::last_write_time(p, fs::last_write_time(p) + std::chrono::seconds(5));
  }
};

std::shared_ptr<const ModelGateway> offline_gateway() {
  ModelConfig cfg;
  cfg.offline_mode = true;
  return std::make_shared<const ModelGateway>(cfg);
}

std::string small_notebook(const std::string& tag) {
  return notebook_json({{"markdown", "# About " + tag}, {"code", "def f_" + tag + "():\n    return 1"}});
}

}  // namespace

TEST_CASE("index_repository") {
  Repo repo;
  const auto gw = offline_gateway();
  SUBCASE("empty repository") {
    const auto s = index_repository(repo.config, *gw);
    CHECK(s.notebooks == 0);
    CHECK(s.chunks == 0);
    CHECK(s.skipped == 0);
    CHECK(s.errors == 0);
    CHECK(VectorStore::load(repo.config.resolved_index_dir()).size() == 0);
  }
  SUBCASE("one notebook with two small cells") {
    repo.put("one.ipynb", small_notebook("x"));
    const auto s = index_repository(repo.config, *gw);
    CHECK(s.notebooks == 1);
    CHECK(s.chunks == 2);
    const auto store = VectorStore::load(repo.config.resolved_index_dir());
    CHECK(store.size() == 2);
    CHECK(store.model_id() == "offline-fnv1a-bow-256");
    const auto text = store.get({"one.ipynb", 0, 0});
    REQUIRE(text);
    CHECK(text->cell_type == "text");
    CHECK(text->contents == "About x");
    CHECK(text->chunk_kind == "WholeCell");
    CHECK(SyncState::load(repo.config.resolved_index_dir()).notebooks.at("one.ipynb").chunk_count == 2);
  }
  SUBCASE("a malformed file is isolated") {
    repo.put("a.ipynb", small_notebook("a"));
    repo.put("b.ipynb", "{ nope");
    repo.put("c.ipynb", small_notebook("c"));
    const auto s = index_repository(repo.config, *gw);
    CHECK(s.notebooks == 2);
    CHECK(s.errors == 1);
    CHECK(VectorStore::load(repo.config.resolved_index_dir()).notebook_ids() ==
          std::set<std::string>{"a.ipynb", "c.ipynb"});
  }
  SUBCASE("missing repository root") {
    repo.config.repo_root = repo.tmp / "absent";
    CHECK_THROWS_AS(index_repository(repo.config, *gw), RootNotFound);
  }
}

TEST_CASE("sync cycles") {
  Repo repo;
  const auto gw = offline_gateway();
  const fs::path index = repo.config.resolved_index_dir();
  CHECK_THROWS_AS(SyncEngine(repo.config, gw), CorruptIndex);

  repo.put("a.ipynb", small_notebook("a"));
  index_repository(repo.config, *gw);
  SyncEngine engine(repo.config, gw);

  auto cycle = [&] { return engine.run_cycle(); };
  auto ids = [&] { return engine.store().notebook_ids(); };

  SUBCASE("nothing changed") {
    const std::string state_before = read_file(index / kSyncStateFile);
    const auto s = cycle();
    CHECK(s.added + s.updated + s.removed == 0);
    CHECK(s.store_writes == 0);
    CHECK(read_file(index / kSyncStateFile) == state_before);
  }
  SUBCASE("add, touch, modify, break, delete") {
    repo.put("sub/b.ipynb", small_notebook("b"));
    auto s = cycle();
    CHECK(s.added == 1);
    CHECK(ids() == std::set<std::string>{"a.ipynb", "sub/b.ipynb"});

    repo.touch("a.ipynb");
    s = cycle();
    CHECK(s.added + s.updated + s.removed == 0);
    CHECK(s.store_writes == 0);

    repo.put("a.ipynb", small_notebook("a2"));
    s = cycle();
    CHECK(s.updated == 1);
    CHECK(engine.store().get({"a.ipynb", 0, 0})->contents == "About a2");

    repo.put("sub/b.ipynb", "{\"cells\": 5}");
    s = cycle();
    CHECK(s.removed == 1);
    CHECK(s.errors == 1);
    CHECK(ids() == std::set<std::string>{"a.ipynb"});

    s = cycle();  // still broken, nothing left to do
    CHECK(s.store_writes == 0);

    repo.remove("a.ipynb");
    s = cycle();
    CHECK(s.removed == 1);
    CHECK(engine.store().size() == 0);
    CHECK(engine.state().notebooks.empty());

    const VectorStore on_disk = VectorStore::load(index);
    CHECK(on_disk.size() == 0);
  }
  SUBCASE("notebooks without chunks are tracked but not stored") {
    repo.put("empty.ipynb", notebook_json({{"code", "%matplotlib inline"}}));
    auto s = cycle();
    CHECK(s.added == 1);
    CHECK(engine.state().notebooks.count("empty.ipynb") == 1);
    CHECK(engine.store().count_for("empty.ipynb") == 0);
    s = cycle();
    CHECK(s.store_writes == 0);
  }
}

TEST_CASE("sync repairs interrupted work") {
  Repo repo;
  const auto gw = offline_gateway();
  const fs::path index = repo.config.resolved_index_dir();
  repo.put("a.ipynb", small_notebook("a"));
  repo.put("b.ipynb", small_notebook("b"));
  index_repository(repo.config, *gw);

  SUBCASE("chunks lost after delete") {
    VectorStore store = VectorStore::load(index);
    store.delete_notebook("a.ipynb");
    store.save(index);
    SyncEngine engine(repo.config, gw);
    const auto s = engine.run_cycle();
    CHECK(s.updated == 1);
    CHECK(engine.store().count_for("a.ipynb") == 2);
    CHECK(engine.store().count_for("b.ipynb") == 2);
  }
  SUBCASE("chunks stored but never recorded") {
    SyncState state = SyncState::load(index);
    state.notebooks.erase("b.ipynb");
    state.save(index);
    SyncEngine engine(repo.config, gw);
    const auto s = engine.run_cycle();
    CHECK(s.removed == 1);
    CHECK(s.added == 1);
    CHECK(engine.store().count_for("b.ipynb") == 2);
    CHECK(engine.run_cycle().store_writes == 0);
  }
}

TEST_CASE("provider failures keep the existing index entry") {
  Repo repo;
  repo.config.model.offline_mode = false;
  repo.config.model.api_key_env.clear();
  repo.config.model.retry.backoff_base_ms = 0;
  auto provider = std::make_shared<FakeProvider>();
  auto gw = std::make_shared<const ModelGateway>(repo.config.model, provider);
  repo.put("a.ipynb", small_notebook("a"));
  index_repository(repo.config, *gw);
  SyncEngine engine(repo.config, gw);
  CHECK(engine.store().dim() == 8);

  repo.put("a.ipynb", small_notebook("changed"));
  provider->fail = true;
  auto s = engine.run_cycle();
  CHECK(s.errors == 1);
  CHECK(engine.store().get({"a.ipynb", 0, 0})->contents == "About a");

  provider->fail = false;
  s = engine.run_cycle();
  CHECK(s.updated == 1);
  CHECK(engine.store().get({"a.ipynb", 0, 0})->contents == "About changed");
}

TEST_CASE("index lock is exclusive") {
  TempDir dir;
  {
    IndexLock first(dir.path());
    CHECK_THROWS_AS(IndexLock(dir.path()), IndexLocked);
  }
  CHECK_NOTHROW(IndexLock(dir.path()));
}

TEST_CASE("sync state persistence") {
  TempDir dir;
  CHECK(SyncState::load(dir.path()).notebooks.empty());
  SyncState s;
  s.notebooks["x/y.ipynb"] = {0xfedcba9876543210ULL, 42, 3};
  s.last_sync_at = 99;
  s.save(dir.path());
  const auto loaded = SyncState::load(dir.path());
  CHECK(loaded.notebooks == s.notebooks);
  CHECK(loaded.last_sync_at == 99);
  write_file(dir / kSyncStateFile, "[]");
  CHECK_THROWS_AS(SyncState::load(dir.path()), CorruptIndex);
}

TEST_CASE("run with once logs one cycle") {
  Repo repo;
  const auto gw = offline_gateway();
  repo.put("a.ipynb", small_notebook("a"));
  index_repository(repo.config, *gw);
  SyncEngine engine(repo.config, gw);
  std::ostringstream log;
  std::atomic<bool> stop{false};
  engine.run(true, log, stop);
  CHECK(log.str() == "sync: added 0, updated 0, removed 0, errors 0\n");
}

TEST_CASE("configuration files") {
  TempDir dir;
  SUBCASE("defaults") {
    const auto cfg = app_config_from_json_text("{}", dir.path());
    CHECK(cfg.sync_interval_s == 900);
    CHECK(cfg.token_budget == 8191);
    CHECK(cfg.model.completion_model == "gpt-4-32k");
    CHECK(cfg.resolved_index_dir() == dir.path() / "." / ".nbsearch");
  }
  SUBCASE("relative paths") {
    write_file(dir / "cfg/nbsearch.json",
               R"({"repo_root": "../repo", "index_dir": "idx", "token_budget": 64,
                   "model": {"offline_mode": true, "retry": {"max_attempts": 5}}})");
    const auto cfg = load_app_config(dir / "cfg/nbsearch.json");
    CHECK(cfg.repo_root == dir / "cfg" / "../repo");
    CHECK(cfg.resolved_index_dir() == dir / "cfg" / "../repo" / "idx");
    CHECK(cfg.token_budget == 64);
    CHECK(cfg.model.offline_mode);
    CHECK(cfg.model.retry.max_attempts == 5);
  }
  SUBCASE("rejections") {
    CHECK_THROWS_AS(app_config_from_json_text("{\"colour\": 1}", dir.path()), ConfigError);
    CHECK_THROWS_AS(app_config_from_json_text("{\"model\": {\"api_key\": \"sk\"}}", dir.path()), ConfigError);
    CHECK_THROWS_AS(app_config_from_json_text("{\"token_budget\": 0}", dir.path()), ConfigError);
    CHECK_THROWS_AS(app_config_from_json_text("{\"token_budget\": -5}", dir.path()), ConfigError);
    CHECK_THROWS_AS(app_config_from_json_text("{\"sync_interval_s\": \"often\"}", dir.path()), ConfigError);
    CHECK_THROWS_AS(app_config_from_json_text("[", dir.path()), ConfigError);
    CHECK_THROWS_AS(load_app_config(dir / "missing.json"), ConfigError);
  }
}
