#include "rusgroup/inference.hpp"

#include <algorithm>
#include <ctime>
#include <exception>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "http.hpp"
#include "rusgroup/dataset_io.hpp"
#include "rusgroup/digest.hpp"
#include "rusgroup/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rusgroup {
namespace {

std::string utc_now_iso8601() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string mime_for(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return "application/octet-stream";
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

}  // namespace

const ModelRoleConfig& RoleConfigs::for_role(ModelRole role) const noexcept {
  switch (role) {
    case ModelRole::unimodal1:
      return unimodal1;
    case ModelRole::unimodal2:
      return unimodal2;
    case ModelRole::multimodal:
      break;
  }
  return multimodal;
}

void RoleConfigs::validate(bool determinism_mode) const {
  for (ModelRole role : {ModelRole::unimodal1, ModelRole::unimodal2, ModelRole::multimodal}) {
    const ModelRoleConfig& c = for_role(role);
    const std::string name(to_string(role));
    if (c.role != role) throw InputError("endpoint config in slot " + name + " declares role " + std::string(to_string(c.role)));
    if (c.endpoint_url.empty()) throw InputError("endpoint config " + name + ": endpoint_url is empty");
    if (c.model_id.empty()) throw InputError("endpoint config " + name + ": model_id is empty");
    if (c.max_output_tokens < 1) throw InputError("endpoint config " + name + ": max_output_tokens must be >= 1");
    if (c.temperature < 0.0) throw InputError("endpoint config " + name + ": temperature must be >= 0");
    if (c.max_retries < 0) throw InputError("endpoint config " + name + ": max_retries must be >= 0");
    if (determinism_mode && c.temperature != 0.0) {
      throw InputError("endpoint config " + name + ": determinism_mode requires temperature 0");
    }
    (void)http::parse_url(c.endpoint_url);
  }
}

ResolvedMedia resolve_media(const std::string& handle, const fs::path& media_root) {
  if (starts_with(handle, "http://") || starts_with(handle, "https://") || starts_with(handle, "data:")) {
    return {handle, sha256_hex(handle)};
  }
  std::string local = handle;
  if (starts_with(local, "file://")) local = local.substr(7);
  fs::path p(local);
  if (p.is_relative()) p = media_root / p;
  if (!fs::is_regular_file(p)) throw InputError("media not found: " + handle + " (looked at " + p.string() + ")");
  const std::string bytes = read_file(p);
  return {"data:" + mime_for(p) + ";base64," + base64_encode(bytes), sha256_hex(bytes)};
}

json build_chat_request(const ModelRoleConfig& config, const RenderedPrompt& prompt,
                        const std::optional<std::string>& image_url) {
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", prompt.text}});
  if (image_url) content.push_back({{"type", "image_url"}, {"image_url", {{"url", *image_url}}}});
  return json{{"model", config.model_id},
              {"messages", json::array({json{{"role", "user"}, {"content", content}}})},
              {"max_tokens", config.max_output_tokens},
              {"temperature", config.temperature},
              {"stream", false}};
}

std::string parse_chat_response(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    throw ProtocolError("chat response is not JSON", body);
  }
  if (!j.is_object()) throw ProtocolError("chat response is not an object", body);
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array()) throw ProtocolError("chat response has no choices array", body);
  if (choices->empty()) throw ProtocolError("chat response has an empty choices list", body);
  const json& first = (*choices)[0];
  if (!first.is_object() || !first.contains("message") || !first["message"].is_object()) {
    throw ProtocolError("choices[0].message missing", body);
  }
  const json& message = first["message"];
  const auto content = message.find("content");
  if (content == message.end() || !content->is_string()) {
    throw ProtocolError("choices[0].message.content is not a string", body);
  }
  return content->get<std::string>();
}

void ChatClient::pace(const ModelRoleConfig& config) {
  if (config.requests_per_second <= 0.0) return;
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / config.requests_per_second));
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(pace_mu_);
    auto& next = next_slot_[config.endpoint_url];
    slot = std::max(next, std::chrono::steady_clock::now());
    next = slot + interval;
  }
  std::this_thread::sleep_until(slot);
}

ChatClient::Reply ChatClient::complete(const ModelRoleConfig& config, const RenderedPrompt& prompt,
                                       const std::optional<std::string>& image_url) {
  const std::string body = build_chat_request(config, prompt, image_url).dump();
  http::RetryPolicy policy;
  policy.max_retries = config.max_retries;
  policy.initial_backoff = config.initial_backoff;
  auto [res, retries] = http::post_json_with_retries(config.endpoint_url, body, config.request_timeout,
                                                     http::env_or_empty(config.api_key_env), policy, [&] {
                                                       pace(config);
                                                       ++requests_;
                                                     });
  Reply reply;
  reply.answer = parse_chat_response(res.body);
  reply.raw_body = std::move(res.body);
  reply.retries = retries;
  return reply;
}

PredictionTriplet predict_triplet(const InstructionInstance& instance, const DatasetDescriptor& descriptor,
                                  const RoleConfigs& configs, PredictionContext& ctx) {
  if (!ctx.prompts) throw InputError("prediction context has no prompt registry");
  PredictionTriplet out;
  out.instance_id = instance.instance_id;

  std::optional<ResolvedMedia> media;
  for (ModelRole role : {ModelRole::unimodal1, ModelRole::unimodal2, ModelRole::multimodal}) {
    const ModelRoleConfig& cfg = configs.for_role(role);
    const std::string& template_id =
        cfg.prompt_template_id.empty() ? descriptor.prompt_template_id : cfg.prompt_template_id;
    const RenderedPrompt prompt = render_prompt(ctx.prompts->get(template_id), instance, role, ctx.render);
    if (prompt.media && !media) media = resolve_media(*prompt.media, ctx.media_root);
    const std::string media_digest = prompt.media ? media->digest : std::string{};
    const std::string key = PredictionCache::make_key(cfg.model_id, role, template_id, prompt.text, media_digest);

    RoleProvenance prov;
    std::string answer;
    std::optional<CacheEntry> hit = ctx.cache ? ctx.cache->get(key) : std::nullopt;
    if (hit) {
      answer = hit->answer;
      prov = {hit->model_id, hit->endpoint, hit->timestamp, true, hit->retries};
    } else {
      if (!ctx.client) throw InputError("no chat client and no cached response for " + instance.instance_id);
      const std::optional<std::string> url =
          prompt.media ? std::optional<std::string>(media->payload_url) : std::nullopt;
      ChatClient::Reply reply = ctx.client->complete(cfg, prompt, url);
      CacheEntry entry{reply.raw_body, reply.answer, cfg.model_id, cfg.endpoint_url, utc_now_iso8601(),
                       reply.retries};
      if (ctx.cache) ctx.cache->put(key, entry);
      answer = std::move(reply.answer);
      prov = {entry.model_id, entry.endpoint, entry.timestamp, false, entry.retries};
    }
    switch (role) {
      case ModelRole::unimodal1:
        out.y1 = std::move(answer);
        out.provenance.unimodal1 = std::move(prov);
        break;
      case ModelRole::unimodal2:
        out.y2 = std::move(answer);
        out.provenance.unimodal2 = std::move(prov);
        break;
      case ModelRole::multimodal:
        out.ym = std::move(answer);
        out.provenance.multimodal = std::move(prov);
        break;
    }
  }
  return out;
}

std::vector<PredictionTriplet> predict_dataset(std::span<const InstructionInstance> instances,
                                               const DatasetDescriptor& descriptor, const RoleConfigs& configs,
                                               PredictionContext& ctx, const PredictOptions& options) {
  if (options.parallelism < 1) throw InputError("parallelism must be >= 1");
  const std::size_t n = instances.size();
  std::vector<std::optional<PredictionTriplet>> results(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mu;
  std::exception_ptr first_error;
  std::string failed_id;

  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        results[i] = predict_triplet(instances[i], descriptor, configs, ctx);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) {
          first_error = std::current_exception();
          failed_id = instances[i].instance_id;
        }
        failed.store(true);
        return;
      }
    }
  };

  {
    const std::size_t workers = std::min(options.parallelism, std::max<std::size_t>(n, 1));
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  if (first_error) {
    if (!options.checkpoint_path.empty()) {
      json completed = json::array();
      for (std::size_t i = 0; i < n; ++i) {
        if (results[i]) completed.push_back(instances[i].instance_id);
      }
      std::string category = "internal";
      std::string message;
      try {
        std::rethrow_exception(first_error);
      } catch (const Error& e) {
        category = to_string(e.kind());
        message = e.what();
      } catch (const std::exception& e) {
        message = e.what();
      }
      const json checkpoint{{"dataset_id", descriptor.dataset_id},
                            {"completed_ids", completed},
                            {"failed_instance_id", failed_id},
                            {"error", {{"category", category}, {"message", message}}}};
      write_file_atomic(options.checkpoint_path, checkpoint.dump(2) + "\n");
    }
    std::rethrow_exception(first_error);
  }
  if (!options.checkpoint_path.empty() && fs::exists(options.checkpoint_path)) {
    fs::remove(options.checkpoint_path);
  }

  std::vector<PredictionTriplet> out;
  out.reserve(n);
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

void to_json(json& j, const ModelRoleConfig& v) {
  j = json{{"role", to_string(v.role)},
           {"endpoint_url", v.endpoint_url},
           {"model_id", v.model_id},
           {"prompt_template_id", v.prompt_template_id},
           {"max_output_tokens", v.max_output_tokens},
           {"temperature", v.temperature},
           {"request_timeout_ms", v.request_timeout.count()},
           {"max_retries", v.max_retries},
           {"initial_backoff_ms", v.initial_backoff.count()},
           {"requests_per_second", v.requests_per_second},
           {"api_key_env", v.api_key_env}};
}

void from_json(const json& j, ModelRoleConfig& v) {
  static const std::set<std::string> kKnown = {
      "role",        "endpoint_url",       "model_id",           "prompt_template_id",
      "max_output_tokens", "temperature",  "request_timeout_ms", "max_retries",
      "initial_backoff_ms", "requests_per_second", "api_key_env"};
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.contains(key)) throw InputError("unknown endpoint config key: " + key);
  }
  ModelRoleConfig d;
  v.role = parse_model_role(j.at("role").get<std::string>());
  v.endpoint_url = j.at("endpoint_url").get<std::string>();
  v.model_id = j.at("model_id").get<std::string>();
  v.prompt_template_id = j.value("prompt_template_id", d.prompt_template_id);
  v.max_output_tokens = j.value("max_output_tokens", d.max_output_tokens);
  v.temperature = j.value("temperature", d.temperature);
  v.request_timeout = std::chrono::milliseconds(j.value("request_timeout_ms", d.request_timeout.count()));
  v.max_retries = j.value("max_retries", d.max_retries);
  v.initial_backoff = std::chrono::milliseconds(j.value("initial_backoff_ms", d.initial_backoff.count()));
  v.requests_per_second = j.value("requests_per_second", d.requests_per_second);
  v.api_key_env = j.value("api_key_env", d.api_key_env);
}

}  // namespace rusgroup
