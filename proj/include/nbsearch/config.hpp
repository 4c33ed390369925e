#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "nbsearch/chunker.hpp"
#include "nbsearch/model_gateway.hpp"
#include "nbsearch/notebook.hpp"

namespace nbsearch {

inline constexpr int kDefaultSyncIntervalSeconds = 900;

struct AppConfig {
  std::filesystem::path repo_root = ".";
  // Relative index_dir values are resolved against repo_root.
  std::filesystem::path index_dir = ".nbsearch";
  int sync_interval_s = kDefaultSyncIntervalSeconds;
  std::size_t token_budget = kDefaultTokenBudget;
  std::size_t k_default = 5;
  std::string glob = std::string(kDefaultNotebookGlob);
  std::string estimator_id = std::string(kHeuristicEstimatorId);
  ModelConfig model;

  std::filesystem::path resolved_index_dir() const;
  TokenBudget budget() const { return {token_budget, estimator_id}; }
  /// Throws ConfigError.
  void validate() const;
};

/// Reads a JSON config. Relative repo_root is taken relative to the file's
/// directory. Unknown keys and any key named api_key are rejected.
/// Throws ConfigError.
AppConfig load_app_config(const std::filesystem::path& file);

AppConfig app_config_from_json_text(const std::string& text, const std::filesystem::path& base_dir);

}  // namespace nbsearch
