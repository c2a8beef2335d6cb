#pragma once

#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "rusgroup/types.hpp"

namespace rusgroup {

struct CacheEntry {
  std::string raw_response;  // endpoint body, byte for byte
  std::string answer;        // choices[0].message.content
  std::string model_id;
  std::string endpoint;
  std::string timestamp;
  int retries = 0;

  friend bool operator==(const CacheEntry&, const CacheEntry&) = default;
};

// Disk cache of endpoint responses, one JSON file per key:
//
//   <root>/<key[0:2]>/<key>.json
//
// Readers run concurrently; writers are serialized and land atomically.
class PredictionCache {
 public:
  explicit PredictionCache(std::filesystem::path root);

  // SHA-256 over the length-prefixed fields.
  static std::string make_key(std::string_view model_id, ModelRole role, std::string_view prompt_template_id,
                              std::string_view rendered_prompt, std::string_view media_digest);

  [[nodiscard]] std::optional<CacheEntry> get(const std::string& key) const;
  void put(const std::string& key, const CacheEntry& entry);

  [[nodiscard]] const std::filesystem::path& root() const noexcept { return root_; }
  [[nodiscard]] std::filesystem::path path_for(const std::string& key) const;

 private:
  std::filesystem::path root_;
  mutable std::shared_mutex mu_;
};

void to_json(nlohmann::json& j, const CacheEntry& v);
void from_json(const nlohmann::json& j, CacheEntry& v);

}  // namespace rusgroup
