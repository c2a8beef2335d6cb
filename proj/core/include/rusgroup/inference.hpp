#pragma once

// Elicits y1, y2, ym from OpenAI-compatible chat-completions endpoints under
// the three model roles, with a disk cache so re-runs never touch the network.
//
// Wire contract (request):
//   {"model": ..., "max_tokens": N, "temperature": T,
//    "messages": [{"role": "user", "content": [
//        {"type": "text", "text": ...},
//        {"type": "image_url", "image_url": {"url": ...}}]}]}
// Wire contract (response): choices[0].message.content as a string.

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rusgroup/cache.hpp"
#include "rusgroup/prompts.hpp"
#include "rusgroup/types.hpp"

namespace rusgroup {

struct ModelRoleConfig {
  ModelRole role = ModelRole::multimodal;
  std::string endpoint_url;
  std::string model_id;
  // Overrides the dataset's template when non-empty.
  std::string prompt_template_id;
  int max_output_tokens = 64;
  double temperature = 0.0;
  std::chrono::milliseconds request_timeout{30000};
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{200};
  // 0 disables pacing.
  double requests_per_second = 0.0;
  // Name of the environment variable holding the bearer token.
  std::string api_key_env;

  friend bool operator==(const ModelRoleConfig&, const ModelRoleConfig&) = default;
};

struct RoleConfigs {
  ModelRoleConfig unimodal1;
  ModelRoleConfig unimodal2;
  ModelRoleConfig multimodal;

  [[nodiscard]] const ModelRoleConfig& for_role(ModelRole role) const noexcept;
  // Roles must match their slot; temperature must be 0 in determinism mode.
  void validate(bool determinism_mode) const;

  friend bool operator==(const RoleConfigs&, const RoleConfigs&) = default;
};

struct ResolvedMedia {
  std::string payload_url;  // URL or data: URI sent to the endpoint
  std::string digest;       // SHA-256 of file bytes, or of the reference for remote URIs
};

// http(s) and data: URIs pass through; anything else is a local file
// (optionally file://) resolved against media_root and inlined as base64.
ResolvedMedia resolve_media(const std::string& handle, const std::filesystem::path& media_root);

nlohmann::json build_chat_request(const ModelRoleConfig& config, const RenderedPrompt& prompt,
                                  const std::optional<std::string>& image_url);

// Throws ProtocolError (with the raw body) for anything but a string at
// choices[0].message.content.
std::string parse_chat_response(const std::string& body);

// Thread-safe chat client with per-endpoint request pacing.
class ChatClient {
 public:
  struct Reply {
    std::string answer;
    std::string raw_body;
    int retries = 0;
  };

  Reply complete(const ModelRoleConfig& config, const RenderedPrompt& prompt,
                 const std::optional<std::string>& image_url);

  [[nodiscard]] std::size_t requests_sent() const noexcept { return requests_.load(); }

 private:
  void pace(const ModelRoleConfig& config);

  std::mutex pace_mu_;
  std::map<std::string, std::chrono::steady_clock::time_point> next_slot_;
  std::atomic<std::size_t> requests_{0};
};

struct PredictionContext {
  PredictionCache* cache = nullptr;  // optional
  ChatClient* client = nullptr;
  const PromptRegistry* prompts = nullptr;
  RenderOptions render;
  std::filesystem::path media_root;
};

PredictionTriplet predict_triplet(const InstructionInstance& instance, const DatasetDescriptor& descriptor,
                                  const RoleConfigs& configs, PredictionContext& ctx);

struct PredictOptions {
  std::size_t parallelism = 4;
  // Written when any instance fails; lists the ids that completed.
  std::filesystem::path checkpoint_path;
};

// Output order matches input order. At most `parallelism` requests are in
// flight at once. On failure the checkpoint is written and the first error is
// rethrown; completed instances are already cached, so a rerun only fetches
// what is missing.
std::vector<PredictionTriplet> predict_dataset(std::span<const InstructionInstance> instances,
                                               const DatasetDescriptor& descriptor, const RoleConfigs& configs,
                                               PredictionContext& ctx, const PredictOptions& options = {});

void to_json(nlohmann::json& j, const ModelRoleConfig& v);
// Rejects unknown keys.
void from_json(const nlohmann::json& j, ModelRoleConfig& v);

}  // namespace rusgroup
