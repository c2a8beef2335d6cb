#include "stub_server.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

#include <httplib.h>

namespace rusgroup::stub {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Concatenated text parts of the last message, and whether it carried an image.
std::pair<std::string, bool> prompt_of(const json& body) {
  const json& messages = body.at("messages");
  if (!messages.is_array() || messages.empty()) throw std::invalid_argument("messages must be a non-empty array");
  const json& content = messages.back().at("content");
  if (content.is_string()) return {content.get<std::string>(), false};
  if (!content.is_array()) throw std::invalid_argument("content must be a string or an array of parts");
  std::string text;
  bool image = false;
  for (const auto& part : content) {
    const std::string type = part.at("type").get<std::string>();
    if (type == "text") {
      text += part.at("text").get<std::string>();
    } else if (type == "image_url") {
      if (!part.at("image_url").at("url").is_string()) throw std::invalid_argument("image_url.url must be a string");
      image = true;
    } else {
      throw std::invalid_argument("unknown content part type: " + type);
    }
  }
  return {text, image};
}

json chat_body(const std::string& model, const json& content) {
  return json{{"id", "chatcmpl-stub"},
              {"object", "chat.completion"},
              {"model", model},
              {"choices", json::array({json{{"index", 0},
                                            {"message", {{"role", "assistant"}, {"content", content}}},
                                            {"finish_reason", "stop"}}})}};
}

}  // namespace

struct StubServer::Impl {
  httplib::Server server;
};

StubConfig StubConfig::from_json(const json& j) {
  StubConfig c;
  c.model_roles = j.value("model_roles", std::map<std::string, std::string>{});
  c.default_answer = j.value("default_answer", c.default_answer);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.latency = std::chrono::milliseconds(j.value("latency_ms", 0));
  for (const auto& r : j.value("rules", json::array())) {
    AnswerRule rule;
    rule.match = r.at("match").get<std::string>();
    rule.answer = r.value("answer", std::string{});
    rule.answers = r.value("answers", std::map<std::string, std::string>{});
    c.rules.push_back(std::move(rule));
  }
  return c;
}

StubConfig StubConfig::load(const std::filesystem::path& answers_file) {
  std::ifstream in(answers_file);
  if (!in) throw std::runtime_error("cannot read " + answers_file.string());
  return from_json(json::parse(in));
}

std::vector<double> hashed_embedding(const std::string& text, std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    const std::uint64_t h = fnv1a(token);
    v[h % dim] += (h >> 63) ? 1.0 : -1.0;
    v[(h >> 17) % dim] += 0.5;
    token.clear();
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else {
      token += static_cast<char>(std::tolower(c));
    }
  }
  flush();
  return v;
}

StubServer::StubServer(StubConfig config) : impl_(std::make_unique<Impl>()), config_(std::move(config)) {
  auto& srv = impl_->server;
  srv.new_task_queue = [] { return new httplib::ThreadPool(16); };

  srv.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
    const std::size_t now = ++in_flight_;
    std::size_t prev = max_in_flight_.load();
    while (now > prev && !max_in_flight_.compare_exchange_weak(prev, now)) {
    }
    struct Leave {
      std::atomic<std::size_t>& n;
      ~Leave() { --n; }
    } leave{in_flight_};

    json body;
    std::string prompt;
    std::string model;
    try {
      body = json::parse(req.body);
      model = body.at("model").get<std::string>();
      prompt = prompt_of(body).first;
      if (!body.at("max_tokens").is_number_integer()) throw std::invalid_argument("max_tokens must be an integer");
      if (!body.at("temperature").is_number()) throw std::invalid_argument("temperature must be a number");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(json{{"error", {{"message", e.what()}}}}.dump(), "application/json");
      return;
    }

    FaultPlan faults;
    std::size_t ordinal = 0;
    {
      std::lock_guard lock(mu_);
      ordinal = chat_total_++;
      ++per_model_[model];
      log_.push_back(body);
      faults = config_.faults;
    }
    if (config_.latency.count() > 0) std::this_thread::sleep_for(config_.latency);

    if (static_cast<int>(ordinal) < faults.fail_first_n ||
        (!faults.fail_on_substring.empty() && prompt.find(faults.fail_on_substring) != std::string::npos)) {
      res.status = static_cast<int>(ordinal) < faults.fail_first_n ? faults.fail_status : faults.fail_on_status;
      res.set_content(json{{"error", {{"message", "injected failure"}}}}.dump(), "application/json");
      return;
    }
    if (faults.malformed_body) {
      res.set_content("{\"choices\": [", "application/json");
      return;
    }
    if (faults.empty_choices) {
      res.set_content(json{{"id", "chatcmpl-stub"}, {"choices", json::array()}}.dump(), "application/json");
      return;
    }
    if (faults.non_string_content) {
      res.set_content(chat_body(model, json::array({1, 2})).dump(), "application/json");
      return;
    }

    std::string role = "multimodal";
    if (auto it = config_.model_roles.find(model); it != config_.model_roles.end()) role = it->second;
    std::string answer = config_.default_answer;
    for (const auto& rule : config_.rules) {
      if (prompt.find(rule.match) == std::string::npos) continue;
      auto it = rule.answers.find(role);
      answer = it != rule.answers.end() ? it->second : rule.answer;
      break;
    }
    res.set_content(chat_body(model, answer).dump(), "application/json");
  });

  srv.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
    std::vector<std::string> inputs;
    std::string model;
    try {
      const json body = json::parse(req.body);
      model = body.value("model", std::string{});
      const json& input = body.at("input");
      if (input.is_string()) {
        inputs.push_back(input.get<std::string>());
      } else {
        inputs = input.get<std::vector<std::string>>();
      }
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(json{{"error", {{"message", e.what()}}}}.dump(), "application/json");
      return;
    }
    {
      std::lock_guard lock(mu_);
      ++embed_total_;
    }
    json data = json::array();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      data.push_back({{"object", "embedding"}, {"index", i}, {"embedding", hashed_embedding(inputs[i], config_.embedding_dim)}});
    }
    res.set_content(json{{"object", "list"}, {"model", model}, {"data", data}}.dump(), "application/json");
  });
}

StubServer::~StubServer() { stop(); }

void StubServer::start() {
  if (thread_.joinable()) return;
  auto& srv = impl_->server;
  port_ = config_.port == 0 ? srv.bind_to_any_port(config_.host) : (srv.bind_to_port(config_.host, config_.port) ? config_.port : -1);
  if (port_ <= 0) throw std::runtime_error("stub server could not bind " + config_.host);
  thread_ = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
}

void StubServer::run() {
  auto& srv = impl_->server;
  port_ = config_.port == 0 ? srv.bind_to_any_port(config_.host) : (srv.bind_to_port(config_.host, config_.port) ? config_.port : -1);
  if (port_ <= 0) throw std::runtime_error("stub server could not bind " + config_.host);
  srv.listen_after_bind();
}

void StubServer::stop() {
  if (impl_) impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

std::string StubServer::base_url() const { return "http://" + config_.host + ":" + std::to_string(port_); }

void StubServer::set_faults(const FaultPlan& faults) {
  std::lock_guard lock(mu_);
  config_.faults = faults;
}

void StubServer::reset_counters() {
  std::lock_guard lock(mu_);
  per_model_.clear();
  chat_total_ = 0;
  embed_total_ = 0;
  log_.clear();
  max_in_flight_ = 0;
}

std::size_t StubServer::chat_requests() const {
  std::lock_guard lock(mu_);
  return chat_total_;
}

std::size_t StubServer::chat_requests(const std::string& model_id) const {
  std::lock_guard lock(mu_);
  auto it = per_model_.find(model_id);
  return it == per_model_.end() ? 0 : it->second;
}

std::size_t StubServer::embedding_requests() const {
  std::lock_guard lock(mu_);
  return embed_total_;
}

std::vector<json> StubServer::chat_log() const {
  std::lock_guard lock(mu_);
  return log_;
}

}  // namespace rusgroup::stub
