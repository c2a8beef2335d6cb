#pragma once

// In-process fake of an OpenAI-compatible endpoint for tests and demos.
//
//   POST /v1/chat/completions   canned answers keyed by prompt substring
//   POST /v1/embeddings         deterministic hashed bag-of-words vectors
//
// Answers file:
//   {"model_roles": {"demo-text": "unimodal1", ...},
//    "default_answer": "unknown",
//    "rules": [{"match": "substring", "answer": "fallback",
//               "answers": {"unimodal1": "...", "unimodal2": "...", "multimodal": "..."}}]}

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

namespace rusgroup::stub {

struct AnswerRule {
  std::string match;
  std::string answer;
  std::map<std::string, std::string> answers;  // role name -> answer
};

struct FaultPlan {
  // The first N chat requests get `fail_status`.
  int fail_first_n = 0;
  int fail_status = 429;
  // Requests whose prompt contains this substring always get `fail_on_status`.
  std::string fail_on_substring;
  int fail_on_status = 500;
  bool malformed_body = false;
  bool empty_choices = false;
  bool non_string_content = false;
};

struct StubConfig {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  std::map<std::string, std::string> model_roles;
  std::vector<AnswerRule> rules;
  std::string default_answer = "unknown";
  FaultPlan faults;
  std::chrono::milliseconds latency{0};
  std::size_t embedding_dim = 16;

  static StubConfig from_json(const nlohmann::json& j);
  static StubConfig load(const std::filesystem::path& answers_file);
};

// Deterministic unit-free vector for `text`; identical texts give identical vectors.
std::vector<double> hashed_embedding(const std::string& text, std::size_t dim);

class StubServer {
 public:
  explicit StubServer(StubConfig config);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  // Binds and serves on a background thread.
  void start();
  void stop();
  // Blocks serving on the calling thread.
  void run();

  [[nodiscard]] int port() const noexcept { return port_; }
  [[nodiscard]] std::string base_url() const;
  [[nodiscard]] std::string chat_url() const { return base_url() + "/v1/chat/completions"; }
  [[nodiscard]] std::string embeddings_url() const { return base_url() + "/v1/embeddings"; }

  void set_faults(const FaultPlan& faults);
  void reset_counters();

  [[nodiscard]] std::size_t chat_requests() const;
  [[nodiscard]] std::size_t chat_requests(const std::string& model_id) const;
  [[nodiscard]] std::size_t embedding_requests() const;
  [[nodiscard]] std::size_t max_in_flight() const noexcept { return max_in_flight_.load(); }
  // Parsed chat request bodies in arrival order.
  [[nodiscard]] std::vector<nlohmann::json> chat_log() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  StubConfig config_;
  int port_ = 0;
  std::thread thread_;

  mutable std::mutex mu_;
  std::map<std::string, std::size_t> per_model_;
  std::size_t chat_total_ = 0;
  std::size_t embed_total_ = 0;
  std::vector<nlohmann::json> log_;
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_{0};
};

}  // namespace rusgroup::stub
