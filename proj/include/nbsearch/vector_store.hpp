#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "nbsearch/embedding.hpp"

namespace nbsearch {

/// Upsert key of a stored chunk.
struct ChunkKey {
  std::string notebook_id;
  int cell_index = 0;
  int unit_index = 0;

  auto operator<=>(const ChunkKey&) const = default;
  bool operator==(const ChunkKey&) const = default;
};

/// "nb:cell:unit"; the notebook id may itself contain ':'.
std::string to_string(const ChunkKey& key);
std::optional<ChunkKey> parse_chunk_key(std::string_view text);

struct StoredObject {
  std::string notebook_id;
  std::string contents;
  std::string cell_type;  // "text" or "code"
  std::string author_name;
  std::int64_t modified_at = 0;
  std::int64_t created_at = 0;
  EmbeddingVector vector;
  int cell_index = 0;
  int unit_index = 0;
  std::string chunk_kind;
  std::int64_t seq = 0;  // assigned by the store

  ChunkKey key() const { return {notebook_id, cell_index, unit_index}; }
};

struct SearchHit {
  StoredObject object;
  double distance = 0.0;
};

struct SearchFilter {
  std::optional<std::string> cell_type;
  std::optional<std::string> notebook_prefix;

  bool matches(const StoredObject& o) const;
};

struct UpsertResult {
  std::size_t inserted = 0;
  std::size_t replaced = 0;
};

inline constexpr int kStoreFormatVersion = 1;
inline constexpr std::string_view kVectorsMagic{"NBSV1\0", 6};

/// In-memory exact cosine index over StoredObjects, optionally bound to a
/// directory that every mutation is written through to.
///
/// Vectors are held as 32-bit floats, exactly as persisted. Queries are
/// rounded to float the same way; distances are then computed in double as
/// 1 - dot / sqrt(|q|^2 |v|^2), clamped to [0, 2], and ranked by
/// (distance, seq). Many concurrent readers or one writer.
class VectorStore {
 public:
  /// dim 0 adopts the dimension of the first upserted vector.
  explicit VectorStore(std::size_t dim = 0, std::string model_id = {}, std::string estimator_id = "heuristic-v1");

  VectorStore(VectorStore&&) noexcept;
  VectorStore& operator=(VectorStore&&) noexcept;
  ~VectorStore();

  /// Throws CorruptIndex.
  static VectorStore load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;

  /// After attach, upsert and delete_notebook persist to dir before returning.
  void attach(const std::filesystem::path& dir);

  /// Throws DimensionMismatch, DuplicateKeyInBatch. The batch is applied
  /// entirely or not at all.
  UpsertResult upsert(std::vector<StoredObject> objects);
  std::size_t delete_notebook(std::string_view notebook_id);

  /// Throws DimensionMismatch.
  std::vector<SearchHit> search(const EmbeddingVector& query, std::size_t k, const SearchFilter& filter = {}) const;

  std::optional<StoredObject> get(const ChunkKey& key) const;
  std::vector<StoredObject> objects() const;
  std::set<std::string> notebook_ids() const;
  std::size_t count_for(std::string_view notebook_id) const;

  std::size_t size() const;
  std::size_t dim() const;
  std::string model_id() const;
  std::string estimator_id() const;
  /// Number of times the store has been written to its attached directory.
  std::uint64_t write_count() const;

 private:
  struct Row {
    StoredObject meta;  // meta.vector.values left empty
    double norm2 = 0.0;  // squared L2 norm of the stored floats
  };

  StoredObject materialize(std::size_t row) const;
  void rebuild_index();
  void persist_locked();
  void save_locked(const std::filesystem::path& dir) const;

  std::size_t dim_;
  std::string model_id_;
  std::string estimator_id_;
  std::vector<Row> rows_;
  std::vector<float> vectors_;  // row-major, rows_.size() * dim_
  std::map<ChunkKey, std::size_t> index_;
  std::int64_t next_seq_ = 0;
  std::optional<std::filesystem::path> attached_;
  std::uint64_t writes_ = 0;
  std::unique_ptr<std::shared_mutex> mutex_;
};

}  // namespace nbsearch
