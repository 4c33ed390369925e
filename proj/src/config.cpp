#include "nbsearch/config.hpp"

#include <json.hpp>
#include <set>
#include <type_traits>

#include "nbsearch/errors.hpp"

namespace nbsearch {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (key == "api_key" || key == "apiKey") {
      throw ConfigError("API keys are read from the environment only; remove `" + key + "` from " + where);
    }
    if (!known.count(key)) throw ConfigError("unknown key `" + key + "` in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    if (it->is_number_integer() && it->template get<long long>() < 0) {
      throw ConfigError(std::string("config key `") + key + "` must not be negative");
    }
  }
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key `") + key + "`: " + e.what());
  }
}

void read_model(const json& j, ModelConfig& m) {
  if (!j.is_object()) throw ConfigError("`model` must be an object");
  reject_unknown(j,
                 {"embed_endpoint", "embed_model", "completion_endpoint", "completion_model",
                  "completion_max_tokens", "api_key_env", "retry", "offline_mode", "offline_dim"},
                 "model");
  read(j, "embed_endpoint", m.embed_endpoint);
  read(j, "embed_model", m.embed_model);
  read(j, "completion_endpoint", m.completion_endpoint);
  read(j, "completion_model", m.completion_model);
  read(j, "completion_max_tokens", m.completion_max_tokens);
  read(j, "api_key_env", m.api_key_env);
  read(j, "offline_mode", m.offline_mode);
  read(j, "offline_dim", m.offline_dim);
  if (auto r = j.find("retry"); r != j.end()) {
    if (!r->is_object()) throw ConfigError("`model.retry` must be an object");
    reject_unknown(*r, {"max_attempts", "backoff_base_ms"}, "model.retry");
    read(*r, "max_attempts", m.retry.max_attempts);
    read(*r, "backoff_base_ms", m.retry.backoff_base_ms);
  }
}

}  // namespace

fs::path AppConfig::resolved_index_dir() const {
  return index_dir.is_absolute() ? index_dir : repo_root / index_dir;
}

void AppConfig::validate() const {
  if (sync_interval_s < 1) throw ConfigError("sync_interval_s must be at least 1");
  if (token_budget < 1) throw ConfigError("token_budget must be at least 1");
  if (k_default < 1) throw ConfigError("k_default must be at least 1");
  if (model.completion_max_tokens < 1) throw ConfigError("completion_max_tokens must be at least 1");
  if (model.retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be at least 1");
  if (model.retry.backoff_base_ms < 0) throw ConfigError("retry.backoff_base_ms must be non-negative");
  if (model.offline_dim < 1) throw ConfigError("offline_dim must be at least 1");
  estimator_for(estimator_id);
}

AppConfig app_config_from_json_text(const std::string& text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"repo_root", "index_dir", "sync_interval_s", "token_budget", "k_default", "glob", "estimator_id",
                  "model"},
                 "config");
  AppConfig cfg;
  std::string repo = cfg.repo_root.string();
  std::string index = cfg.index_dir.string();
  read(j, "repo_root", repo);
  read(j, "index_dir", index);
  read(j, "sync_interval_s", cfg.sync_interval_s);
  read(j, "token_budget", cfg.token_budget);
  read(j, "k_default", cfg.k_default);
  read(j, "glob", cfg.glob);
  read(j, "estimator_id", cfg.estimator_id);
  if (auto m = j.find("model"); m != j.end()) read_model(*m, cfg.model);
  cfg.repo_root = fs::path(repo).is_absolute() ? fs::path(repo) : base_dir / repo;
  cfg.index_dir = index;
  cfg.validate();
  return cfg;
}

AppConfig load_app_config(const fs::path& file) {
  std::string text;
  try {
    text = read_file_bytes(file);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return app_config_from_json_text(text, file.parent_path());
}

}  // namespace nbsearch
