#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "nbsearch/config.hpp"
#include "nbsearch/model_gateway.hpp"
#include "nbsearch/vector_store.hpp"

namespace nbsearch {

struct NotebookSyncEntry {
  std::uint64_t content_hash = 0;
  std::int64_t modified_at = 0;
  std::size_t chunk_count = 0;

  bool operator==(const NotebookSyncEntry&) const = default;
};

/// What the index believes about each notebook, persisted beside the store.
struct SyncState {
  std::map<std::string, NotebookSyncEntry> notebooks;
  std::int64_t last_sync_at = 0;

  /// Missing file yields an empty state. Throws CorruptIndex.
  static SyncState load(const std::filesystem::path& index_dir);
  void save(const std::filesystem::path& index_dir) const;
};

inline constexpr const char* kSyncStateFile = "sync_state.json";
inline constexpr const char* kLockFile = "sync.lock";

/// Exclusive advisory lock on index_dir/sync.lock for the object's lifetime.
/// Throws IndexLocked when another process holds it.
class IndexLock {
 public:
  explicit IndexLock(const std::filesystem::path& index_dir);
  ~IndexLock();
  IndexLock(const IndexLock&) = delete;
  IndexLock& operator=(const IndexLock&) = delete;

 private:
  int fd_ = -1;
};

struct IndexSummary {
  std::size_t notebooks = 0;
  std::size_t chunks = 0;
  std::size_t skipped = 0;  // cells left out because summarization failed
  std::size_t errors = 0;   // notebooks that could not be parsed
  std::vector<std::string> messages;
};

struct CycleSummary {
  std::size_t added = 0;
  std::size_t updated = 0;
  std::size_t removed = 0;
  std::size_t errors = 0;
  std::uint64_t store_writes = 0;
  std::vector<std::string> messages;
};

/// Full rebuild of the index from the repository. Throws ConfigError,
/// ProviderError, Error on unwritable index directories.
IndexSummary index_repository(const AppConfig& config, const ModelGateway& gateway);

/// Incremental reconciliation of an existing index with the repository.
class SyncEngine {
 public:
  /// Loads the index from config.resolved_index_dir(). Throws CorruptIndex
  /// when no index exists.
  SyncEngine(AppConfig config, std::shared_ptr<const ModelGateway> gateway);

  /// One cycle: rescan, re-index changed files, drop vanished ones.
  CycleSummary run_cycle();

  /// Cycles every sync_interval_s until stop becomes true, or once.
  void run(bool once, std::ostream& log, const std::atomic<bool>& stop);

  const VectorStore& store() const noexcept { return store_; }
  const SyncState& state() const noexcept { return state_; }

 private:
  AppConfig config_;
  std::shared_ptr<const ModelGateway> gateway_;
  std::filesystem::path index_dir_;
  VectorStore store_;
  SyncState state_;
};

}  // namespace nbsearch
