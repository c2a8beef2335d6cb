#include "rusgroup/cache.hpp"

#include <mutex>

#include <nlohmann/json.hpp>

#include "rusgroup/dataset_io.hpp"
#include "rusgroup/digest.hpp"
#include "rusgroup/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rusgroup {

PredictionCache::PredictionCache(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
}

std::string PredictionCache::make_key(std::string_view model_id, ModelRole role,
                                      std::string_view prompt_template_id, std::string_view rendered_prompt,
                                      std::string_view media_digest) {
  std::string material;
  for (std::string_view field :
       {model_id, to_string(role), prompt_template_id, rendered_prompt, media_digest}) {
    material += std::to_string(field.size());
    material += ':';
    material += field;
  }
  return sha256_hex(material);
}

fs::path PredictionCache::path_for(const std::string& key) const {
  return root_ / key.substr(0, 2) / (key + ".json");
}

std::optional<CacheEntry> PredictionCache::get(const std::string& key) const {
  std::shared_lock lock(mu_);
  const fs::path p = path_for(key);
  if (!fs::exists(p)) return std::nullopt;
  try {
    return json::parse(read_file(p)).get<CacheEntry>();
  } catch (const json::exception& e) {
    throw InputError("corrupt cache entry " + p.string() + ": " + e.what());
  }
}

void PredictionCache::put(const std::string& key, const CacheEntry& entry) {
  std::unique_lock lock(mu_);
  write_file_atomic(path_for(key), json(entry).dump(2) + "\n");
}

void to_json(json& j, const CacheEntry& v) {
  j = json{{"raw_response", v.raw_response}, {"answer", v.answer},     {"model_id", v.model_id},
           {"endpoint", v.endpoint},         {"timestamp", v.timestamp}, {"retries", v.retries}};
}

void from_json(const json& j, CacheEntry& v) {
  v.raw_response = j.at("raw_response").get<std::string>();
  v.answer = j.at("answer").get<std::string>();
  v.model_id = j.value("model_id", std::string{});
  v.endpoint = j.value("endpoint", std::string{});
  v.timestamp = j.value("timestamp", std::string{});
  v.retries = j.value("retries", 0);
}

}  // namespace rusgroup
