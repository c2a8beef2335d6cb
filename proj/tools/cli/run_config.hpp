#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rusgroup/inference.hpp"
#include "rusgroup/prompts.hpp"
#include "rusgroup/similarity.hpp"
#include "rusgroup/types.hpp"

namespace rusgroup::cli {

struct SimilaritySpec {
  std::string id;
  SimilarityKind kind = SimilarityKind::exact_match;
  SimilarityParams params;
  std::optional<EmbeddingEndpoint> endpoint;
};

// Keys and defaults are listed in README.md. Relative paths resolve against
// the directory holding the config file.
struct RunConfig {
  std::filesystem::path corpus_root;
  std::optional<RoleConfigs> endpoints;
  std::string similarity_id = "auto";
  std::vector<SimilaritySpec> similarities;
  SamplingPlan sampling_plan;
  CategoryBoundaries category_boundaries;
  std::size_t k = 3;
  GroupMethod group_method = GroupMethod::anchor;
  std::filesystem::path exclusion_policy;
  std::filesystem::path prompt_templates;
  std::filesystem::path published_results;
  RenderOptions render;
  std::filesystem::path media_root;
  nlohmann::json training_overrides = nlohmann::json::object();
  std::string eval_similarity_id = "exact_match";
  double eval_threshold = 1.0;
  std::filesystem::path output_root = "out";
  std::filesystem::path cache_dir;
  bool cache_dir_explicit = false;
  std::size_t parallelism = 4;
  bool determinism_mode = true;

  // The config as written plus flag overrides, minus output_root, cache_dir
  // and parallelism. Feeds run_id().
  nlohmann::json canonical;

  // Throws InputError on unknown keys, bad values and missing paths.
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

  void set_seed(std::uint64_t seed);
  void set_similarity(const std::string& id);
  void set_draws(std::uint32_t draws);
  void set_draw_size(std::uint32_t size);
  void set_k(std::size_t k);
  void set_group_method(GroupMethod method);
  void set_output_root(const std::filesystem::path& root);

  // First 16 hex digits of SHA-256 over the canonical JSON.
  [[nodiscard]] std::string run_id() const;

  // Registry of the built-in scorers plus the configured ones.
  [[nodiscard]] SimilarityRegistry similarity_registry() const;
  [[nodiscard]] PromptRegistry prompt_registry() const;
};

}  // namespace rusgroup::cli
