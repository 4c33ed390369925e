#include "nbsearch/sync.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <fstream>
#include <json.hpp>
#include <set>
#include <thread>

#include "nbsearch/errors.hpp"
#include "nbsearch/notebook.hpp"
#include "nbsearch/pipeline.hpp"

namespace nbsearch {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::int64_t now_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::size_t initial_dim(const ModelGateway& gateway) {
  return gateway.config().offline_mode ? gateway.config().offline_dim : 0;
}

}  // namespace

SyncState SyncState::load(const fs::path& index_dir) {
  SyncState state;
  const fs::path file = index_dir / kSyncStateFile;
  if (!fs::exists(file)) return state;
  try {
    const json j = json::parse(read_file_bytes(file));
    state.last_sync_at = j.at("last_sync_at").get<std::int64_t>();
    for (const auto& [id, entry] : j.at("notebooks").items()) {
      NotebookSyncEntry e;
      e.content_hash = std::stoull(entry.at("content_hash").get<std::string>(), nullptr, 16);
      e.modified_at = entry.at("modified_at").get<std::int64_t>();
      e.chunk_count = entry.at("chunk_count").get<std::size_t>();
      state.notebooks.emplace(id, e);
    }
  } catch (const std::exception& e) {
    throw CorruptIndex(std::string("unreadable sync state: ") + e.what());
  }
  return state;
}

void SyncState::save(const fs::path& index_dir) const {
  json notebooks_json = json::object();
  for (const auto& [id, e] : notebooks) {
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(e.content_hash));
    notebooks_json[id] = {{"content_hash", hex}, {"modified_at", e.modified_at}, {"chunk_count", e.chunk_count}};
  }
  const json j = {{"last_sync_at", last_sync_at}, {"notebooks", notebooks_json}};
  const fs::path tmp = index_dir / (std::string(kSyncStateFile) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
    if (!out.flush()) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, index_dir / kSyncStateFile);
}

IndexLock::IndexLock(const fs::path& index_dir) {
  std::error_code ec;
  fs::create_directories(index_dir, ec);
  if (ec) throw Error("cannot create index directory " + index_dir.string() + ": " + ec.message());
  const fs::path file = index_dir / kLockFile;
  fd_ = ::open(file.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error("cannot open lock file " + file.string());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw IndexLocked("another index or sync process holds " + file.string());
  }
}

IndexLock::~IndexLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

IndexSummary index_repository(const AppConfig& config, const ModelGateway& gateway) {
  config.validate();
  const fs::path index_dir = config.resolved_index_dir();
  IndexLock lock(index_dir);

  IndexSummary summary;
  VectorStore store(initial_dim(gateway), gateway.embedding_model_id(), config.estimator_id);
  SyncState state;
  for (const ScannedFile& file : scan_repository(config.repo_root, config.glob)) {
    NotebookDocument doc;
    try {
      doc = load_notebook(config.repo_root, file.path);
    } catch (const Error& e) {
      ++summary.errors;
      summary.messages.push_back(e.what());
      continue;
    }
    NotebookObjects built = build_objects(doc, config.budget(), gateway);
    summary.skipped += built.skipped_cells;
    std::move(built.messages.begin(), built.messages.end(), std::back_inserter(summary.messages));
    summary.chunks += built.objects.size();
    ++summary.notebooks;
    state.notebooks[doc.notebook_id] = {doc.content_hash, doc.modified_at, built.objects.size()};
    store.upsert(std::move(built.objects));
  }
  state.last_sync_at = now_seconds();
  store.save(index_dir);
  state.save(index_dir);
  return summary;
}

SyncEngine::SyncEngine(AppConfig config, std::shared_ptr<const ModelGateway> gateway)
    : config_(std::move(config)),
      gateway_(std::move(gateway)),
      index_dir_(config_.resolved_index_dir()),
      store_(VectorStore::load(index_dir_)),
      state_(SyncState::load(index_dir_)) {
  config_.validate();
  store_.attach(index_dir_);
}

CycleSummary SyncEngine::run_cycle() {
  IndexLock lock(index_dir_);
  CycleSummary summary;
  const std::uint64_t writes_before = store_.write_count();
  bool state_dirty = false;

  // Repair any divergence left by an interrupted cycle before diffing.
  std::set<std::string> suspect;
  for (const auto& [id, entry] : state_.notebooks) {
    if (store_.count_for(id) != entry.chunk_count) suspect.insert(id);
  }
  for (const auto& id : store_.notebook_ids()) {
    if (!state_.notebooks.count(id)) {
      store_.delete_notebook(id);
      ++summary.removed;
      summary.messages.push_back(id + ": removed orphaned chunks");
    }
  }

  const auto files = scan_repository(config_.repo_root, config_.glob);
  std::set<std::string> seen;
  for (const ScannedFile& file : files) {
    seen.insert(file.path);
    auto known = state_.notebooks.find(file.path);
    const bool tracked = known != state_.notebooks.end();
    if (tracked && known->second.content_hash == file.content_hash && !suspect.count(file.path)) continue;

    NotebookDocument doc;
    NotebookObjects built;
    try {
      doc = load_notebook(config_.repo_root, file.path);
      built = build_objects(doc, config_.budget(), *gateway_);
    } catch (const MalformedNotebook& e) {
      ++summary.errors;
      summary.messages.push_back(file.path + ": " + e.what());
      if (tracked) {
        // A previously indexed file that no longer parses leaves the index.
        store_.delete_notebook(file.path);
        state_.notebooks.erase(known);
        state_dirty = true;
        ++summary.removed;
      }
      continue;
    } catch (const Error& e) {
      // Provider or I/O trouble: keep what is indexed and retry next cycle.
      ++summary.errors;
      summary.messages.push_back(file.path + ": " + e.what());
      continue;
    }
    std::move(built.messages.begin(), built.messages.end(), std::back_inserter(summary.messages));

    // Forget the file first: a crash after this point leaves it untracked and
    // the next cycle indexes it from scratch.
    if (tracked) {
      state_.notebooks.erase(known);
      state_.save(index_dir_);
    }
    store_.delete_notebook(doc.notebook_id);
    const std::size_t count = built.objects.size();
    store_.upsert(std::move(built.objects));
    state_.notebooks[doc.notebook_id] = {doc.content_hash, doc.modified_at, count};
    state_dirty = true;
    ++(tracked ? summary.updated : summary.added);
  }

  for (auto it = state_.notebooks.begin(); it != state_.notebooks.end();) {
    if (seen.count(it->first)) {
      ++it;
      continue;
    }
    store_.delete_notebook(it->first);
    it = state_.notebooks.erase(it);
    state_dirty = true;
    ++summary.removed;
  }

  summary.store_writes = store_.write_count() - writes_before;
  if (state_dirty || summary.store_writes > 0) {
    state_.last_sync_at = now_seconds();
    state_.save(index_dir_);
  }
  return summary;
}

void SyncEngine::run(bool once, std::ostream& log, const std::atomic<bool>& stop) {
  while (!stop.load()) {
    const CycleSummary s = run_cycle();
    for (const auto& m : s.messages) log << m << '\n';
    log << "sync: added " << s.added << ", updated " << s.updated << ", removed " << s.removed << ", errors "
        << s.errors << std::endl;
    if (once) return;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(config_.sync_interval_s);
    while (!stop.load() && std::chrono::steady_clock::now() < deadline) {
      std::this_thread::sleep_for(std::chrono::milliseconds(200));
    }
  }
}

}  // namespace nbsearch
