#include "nbsearch/vector_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <mutex>
#include <sstream>

#include "nbsearch/errors.hpp"

namespace nbsearch {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kObjectsFile = "objects.jsonl";
constexpr const char* kVectorsFile = "vectors.bin";

void write_file_durable(const fs::path& path, std::string_view bytes) {
  const fs::path tmp = path.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw Error("cannot write " + tmp.string() + ": " + std::strerror(errno));
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string reason = std::strerror(errno);
      ::close(fd);
      throw Error("cannot write " + tmp.string() + ": " + reason);
    }
    done += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error("cannot replace " + path.string() + ": " + ec.message());
}

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptIndex("missing " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void append_float_le(std::string& out, float f) {
  auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

float read_float_le(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<float>(bits);
}

double squared_norm(const float* v, std::size_t dim) {
  double sum = 0.0;
  for (std::size_t i = 0; i < dim; ++i) sum += static_cast<double>(v[i]) * static_cast<double>(v[i]);
  return sum;
}

json object_to_json(const StoredObject& o) {
  return json{{"notebook_id", o.notebook_id}, {"contents", o.contents},     {"cell_type", o.cell_type},
              {"author_name", o.author_name}, {"modified_at", o.modified_at}, {"created_at", o.created_at},
              {"cell_index", o.cell_index},   {"unit_index", o.unit_index},   {"chunk_kind", o.chunk_kind},
              {"seq", o.seq}};
}

StoredObject object_from_json(const json& j) {
  StoredObject o;
  o.notebook_id = j.at("notebook_id").get<std::string>();
  o.contents = j.at("contents").get<std::string>();
  o.cell_type = j.at("cell_type").get<std::string>();
  o.author_name = j.at("author_name").get<std::string>();
  o.modified_at = j.at("modified_at").get<std::int64_t>();
  o.created_at = j.at("created_at").get<std::int64_t>();
  o.cell_index = j.at("cell_index").get<int>();
  o.unit_index = j.at("unit_index").get<int>();
  o.chunk_kind = j.at("chunk_kind").get<std::string>();
  o.seq = j.at("seq").get<std::int64_t>();
  return o;
}

}  // namespace

std::string to_string(const ChunkKey& key) {
  return key.notebook_id + ":" + std::to_string(key.cell_index) + ":" + std::to_string(key.unit_index);
}

std::optional<ChunkKey> parse_chunk_key(std::string_view text) {
  const auto second = text.rfind(':');
  if (second == std::string_view::npos || second == 0) return std::nullopt;
  const auto first = text.rfind(':', second - 1);
  if (first == std::string_view::npos || first == 0) return std::nullopt;
  auto parse_int = [](std::string_view s) -> std::optional<int> {
    if (s.empty() || s.size() > 9) return std::nullopt;
    int v = 0;
    for (char c : s) {
      if (c < '0' || c > '9') return std::nullopt;
      v = v * 10 + (c - '0');
    }
    return v;
  };
  auto cell = parse_int(text.substr(first + 1, second - first - 1));
  auto unit = parse_int(text.substr(second + 1));
  if (!cell || !unit) return std::nullopt;
  return ChunkKey{std::string(text.substr(0, first)), *cell, *unit};
}

bool SearchFilter::matches(const StoredObject& o) const {
  if (cell_type && o.cell_type != *cell_type) return false;
  if (notebook_prefix && o.notebook_id.compare(0, notebook_prefix->size(), *notebook_prefix) != 0) return false;
  return true;
}

VectorStore::VectorStore(std::size_t dim, std::string model_id, std::string estimator_id)
    : dim_(dim),
      model_id_(std::move(model_id)),
      estimator_id_(std::move(estimator_id)),
      mutex_(std::make_unique<std::shared_mutex>()) {}

VectorStore::VectorStore(VectorStore&&) noexcept = default;
VectorStore& VectorStore::operator=(VectorStore&&) noexcept = default;
VectorStore::~VectorStore() = default;

std::size_t VectorStore::size() const {
  std::shared_lock lock(*mutex_);
  return rows_.size();
}
std::size_t VectorStore::dim() const {
  std::shared_lock lock(*mutex_);
  return dim_;
}
std::string VectorStore::model_id() const {
  std::shared_lock lock(*mutex_);
  return model_id_;
}
std::string VectorStore::estimator_id() const {
  std::shared_lock lock(*mutex_);
  return estimator_id_;
}
std::uint64_t VectorStore::write_count() const {
  std::shared_lock lock(*mutex_);
  return writes_;
}

StoredObject VectorStore::materialize(std::size_t row) const {
  StoredObject o = rows_[row].meta;
  o.vector.model_id = model_id_;
  const float* v = vectors_.data() + row * dim_;
  o.vector.values.assign(v, v + dim_);
  return o;
}

void VectorStore::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < rows_.size(); ++i) index_.emplace(rows_[i].meta.key(), i);
}

UpsertResult VectorStore::upsert(std::vector<StoredObject> objects) {
  std::unique_lock lock(*mutex_);
  UpsertResult result;
  if (objects.empty()) return result;

  std::size_t dim = dim_ != 0 ? dim_ : objects.front().vector.dim();
  if (dim == 0) throw DimensionMismatch("upsert: empty vector");
  std::set<ChunkKey> batch_keys;
  for (const auto& o : objects) {
    if (o.vector.dim() != dim) {
      throw DimensionMismatch("upsert: vector dimension " + std::to_string(o.vector.dim()) + " != " +
                              std::to_string(dim));
    }
    if (o.cell_type != "text" && o.cell_type != "code") throw Error("upsert: invalid cell_type " + o.cell_type);
    if (!batch_keys.insert(o.key()).second) throw DuplicateKeyInBatch("upsert: duplicate key " + to_string(o.key()));
  }

  dim_ = dim;
  if (model_id_.empty()) model_id_ = objects.front().vector.model_id;
  for (auto& o : objects) {
    std::vector<float> values(o.vector.values.begin(), o.vector.values.end());
    const double norm2 = squared_norm(values.data(), dim_);
    o.vector.values.clear();
    auto it = index_.find(o.key());
    if (it != index_.end()) {
      const std::size_t row = it->second;
      o.seq = rows_[row].meta.seq;
      rows_[row] = Row{std::move(o), norm2};
      std::copy(values.begin(), values.end(), vectors_.begin() + static_cast<std::ptrdiff_t>(row * dim_));
      ++result.replaced;
    } else {
      o.seq = next_seq_++;
      index_.emplace(o.key(), rows_.size());
      rows_.push_back(Row{std::move(o), norm2});
      vectors_.insert(vectors_.end(), values.begin(), values.end());
      ++result.inserted;
    }
  }
  persist_locked();
  return result;
}

std::size_t VectorStore::delete_notebook(std::string_view notebook_id) {
  std::unique_lock lock(*mutex_);
  std::vector<Row> kept_rows;
  std::vector<float> kept_vectors;
  kept_rows.reserve(rows_.size());
  kept_vectors.reserve(vectors_.size());
  std::size_t removed = 0;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].meta.notebook_id == notebook_id) {
      ++removed;
      continue;
    }
    kept_rows.push_back(std::move(rows_[i]));
    const auto begin = vectors_.begin() + static_cast<std::ptrdiff_t>(i * dim_);
    kept_vectors.insert(kept_vectors.end(), begin, begin + static_cast<std::ptrdiff_t>(dim_));
  }
  rows_ = std::move(kept_rows);
  vectors_ = std::move(kept_vectors);
  if (removed > 0) {
    rebuild_index();
    persist_locked();
  }
  return removed;
}

std::vector<SearchHit> VectorStore::search(const EmbeddingVector& query, std::size_t k,
                                           const SearchFilter& filter) const {
  std::shared_lock lock(*mutex_);
  if (rows_.empty() || k == 0) return {};
  if (query.dim() != dim_) {
    throw DimensionMismatch("search: query dimension " + std::to_string(query.dim()) + " != " +
                            std::to_string(dim_));
  }
  // The query is rounded to float like the stored vectors, so a stored vector
  // searched for itself gives dot == qq == vv and a distance of exactly 0.
  std::vector<double> q(dim_);
  double qq = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    q[i] = static_cast<double>(static_cast<float>(query.values[i]));
    qq += q[i] * q[i];
  }

  struct Scored {
    double distance;
    std::int64_t seq;
    std::size_t row;
  };
  std::vector<Scored> scored;
  scored.reserve(rows_.size());
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    if (!filter.matches(rows_[r].meta)) continue;
    const float* v = vectors_.data() + r * dim_;
    double dot = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) dot += q[i] * static_cast<double>(v[i]);
    const double denom = std::sqrt(qq * rows_[r].norm2);
    double distance = denom > 0.0 ? 1.0 - dot / denom : 1.0;
    distance = std::clamp(distance, 0.0, 2.0);
    scored.push_back({distance, rows_[r].meta.seq, r});
  }
  const auto less = [](const Scored& a, const Scored& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.seq < b.seq;
  };
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), less);

  std::vector<SearchHit> hits;
  hits.reserve(n);
  for (std::size_t i = 0; i < n; ++i) hits.push_back(SearchHit{materialize(scored[i].row), scored[i].distance});
  return hits;
}

std::optional<StoredObject> VectorStore::get(const ChunkKey& key) const {
  std::shared_lock lock(*mutex_);
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return materialize(it->second);
}

std::vector<StoredObject> VectorStore::objects() const {
  std::shared_lock lock(*mutex_);
  std::vector<StoredObject> out;
  out.reserve(rows_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) out.push_back(materialize(i));
  return out;
}

std::set<std::string> VectorStore::notebook_ids() const {
  std::shared_lock lock(*mutex_);
  std::set<std::string> out;
  for (const auto& r : rows_) out.insert(r.meta.notebook_id);
  return out;
}

std::size_t VectorStore::count_for(std::string_view notebook_id) const {
  std::shared_lock lock(*mutex_);
  return static_cast<std::size_t>(std::count_if(
      rows_.begin(), rows_.end(), [&](const Row& r) { return r.meta.notebook_id == notebook_id; }));
}

void VectorStore::attach(const fs::path& dir) {
  std::unique_lock lock(*mutex_);
  attached_ = dir;
}

void VectorStore::persist_locked() {
  if (!attached_) return;
  save_locked(*attached_);
  ++writes_;
}

void VectorStore::save(const fs::path& dir) const {
  std::shared_lock lock(*mutex_);
  save_locked(dir);
}

void VectorStore::save_locked(const fs::path& dir) const {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create index directory " + dir.string() + ": " + ec.message());

  std::string objects;
  for (const auto& r : rows_) {
    objects += object_to_json(r.meta).dump();
    objects.push_back('\n');
  }
  std::string vectors(kVectorsMagic);
  vectors.reserve(kVectorsMagic.size() + vectors_.size() * 4);
  for (float f : vectors_) append_float_le(vectors, f);

  const json manifest = {{"format_version", kStoreFormatVersion},
                         {"dim", dim_},
                         {"model_id", model_id_},
                         {"estimator_id", estimator_id_},
                         {"object_count", rows_.size()}};
  // Manifest last: a reader that sees it can trust the data files it names.
  write_file_durable(dir / kVectorsFile, vectors);
  write_file_durable(dir / kObjectsFile, objects);
  write_file_durable(dir / kManifestFile, manifest.dump(2) + "\n");
}

VectorStore VectorStore::load(const fs::path& dir) {
  if (!fs::exists(dir / kManifestFile)) throw CorruptIndex("no manifest in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(read_all(dir / kManifestFile));
  } catch (const json::exception& e) {
    throw CorruptIndex(std::string("unreadable manifest: ") + e.what());
  }
  std::size_t dim = 0;
  std::size_t count = 0;
  VectorStore store;
  try {
    if (manifest.at("format_version").get<int>() != kStoreFormatVersion) {
      throw CorruptIndex("unsupported format_version " + manifest.at("format_version").dump());
    }
    dim = manifest.at("dim").get<std::size_t>();
    count = manifest.at("object_count").get<std::size_t>();
    store.dim_ = dim;
    store.model_id_ = manifest.at("model_id").get<std::string>();
    store.estimator_id_ = manifest.at("estimator_id").get<std::string>();
  } catch (const json::exception& e) {
    throw CorruptIndex(std::string("manifest field error: ") + e.what());
  }
  if (count > 0 && dim == 0) throw CorruptIndex("manifest has objects but dim 0");

  const std::string vectors = read_all(dir / kVectorsFile);
  if (vectors.size() < kVectorsMagic.size() || std::string_view(vectors).substr(0, kVectorsMagic.size()) != kVectorsMagic) {
    throw CorruptIndex("vectors.bin has a bad magic header");
  }
  const std::size_t expected = kVectorsMagic.size() + count * dim * 4;
  if (vectors.size() != expected) {
    throw CorruptIndex("vectors.bin holds " + std::to_string(vectors.size()) + " bytes, manifest implies " +
                       std::to_string(expected));
  }

  std::istringstream lines(read_all(dir / kObjectsFile));
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    if (store.rows_.size() == count) throw CorruptIndex("objects.jsonl has more rows than object_count");
    StoredObject o;
    try {
      o = object_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw CorruptIndex("objects.jsonl row " + std::to_string(store.rows_.size()) + ": " + e.what());
    }
    store.next_seq_ = std::max(store.next_seq_, o.seq + 1);
    store.rows_.push_back(Row{std::move(o), 0.0});
  }
  if (store.rows_.size() != count) {
    throw CorruptIndex("objects.jsonl has " + std::to_string(store.rows_.size()) + " rows, manifest says " +
                       std::to_string(count));
  }
  store.vectors_.resize(count * dim);
  for (std::size_t i = 0; i < store.vectors_.size(); ++i) {
    store.vectors_[i] = read_float_le(vectors.data() + kVectorsMagic.size() + 4 * i);
  }
  for (std::size_t r = 0; r < count; ++r) store.rows_[r].norm2 = squared_norm(store.vectors_.data() + r * dim, dim);
  store.rebuild_index();
  if (store.index_.size() != count) throw CorruptIndex("objects.jsonl contains duplicate keys");
  return store;
}

}  // namespace nbsearch
