#pragma once

// Semantic similarity δ: Y × Y → [0, 1] as pluggable scorers.
//
// Every built-in kind is symmetric, reflexive after normalization and bounded
// to [0, 1]. An optional extraction regex is applied to both sides before
// scoring (capture group 1 if present, else the whole match; unmatched text
// passes through unchanged).

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace rusgroup {

enum class SimilarityKind { exact_match, token_f1, normalized_edit, embedding_cosine };

std::string_view to_string(SimilarityKind kind) noexcept;
SimilarityKind parse_similarity_kind(std::string_view s);

// Text -> vector provider backing the embedding_cosine kind.
class Embedder {
 public:
  virtual ~Embedder() = default;
  // Returns one vector per text, same order. Throws TransportError/ProtocolError.
  virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
};

struct EmbeddingEndpoint {
  std::string endpoint_url;  // e.g. http://host:port/v1/embeddings
  std::string model_id;
  std::string api_key_env;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{200};
};

// OpenAI-compatible embeddings client with an in-memory per-text cache.
// Transport access is serialized; concurrent callers share the cache.
class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(EmbeddingEndpoint endpoint);

  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

  [[nodiscard]] std::size_t request_count() const;

 private:
  EmbeddingEndpoint endpoint_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::vector<double>> cache_;
  std::size_t requests_ = 0;
  std::size_t dimension_ = 0;
};

struct SimilarityParams {
  bool case_fold = true;
  std::string extract_pattern;  // empty: no extraction

  friend bool operator==(const SimilarityParams&, const SimilarityParams&) = default;
};

class SimilarityFunction {
 public:
  SimilarityFunction(std::string similarity_id, SimilarityKind kind, SimilarityParams params = {},
                     std::shared_ptr<Embedder> embedder = nullptr);

  static SimilarityFunction builtin(SimilarityKind kind);

  [[nodiscard]] const std::string& id() const noexcept { return id_; }
  [[nodiscard]] SimilarityKind kind() const noexcept { return kind_; }
  [[nodiscard]] const SimilarityParams& params() const noexcept { return params_; }

  // Applies the extraction regex, if any.
  [[nodiscard]] std::string prepare(std::string_view raw) const;

  [[nodiscard]] double operator()(std::string_view a, std::string_view b) const;

  // Scores prepared pairs, batching embedding requests. Order-preserving.
  [[nodiscard]] std::vector<double> batch(
      std::span<const std::pair<std::string, std::string>> pairs) const;

 private:
  [[nodiscard]] double score_prepared(const std::string& a, const std::string& b) const;

  std::string id_;
  SimilarityKind kind_;
  SimilarityParams params_;
  std::shared_ptr<const std::regex> extract_;
  std::shared_ptr<Embedder> embedder_;
};

double score(const SimilarityFunction& fn, std::string_view a, std::string_view b);
std::vector<double> batch_score(const SimilarityFunction& fn,
                                std::span<const std::pair<std::string, std::string>> pairs);

// Raw scorers; inputs are used as-is (no extraction).
double exact_match_similarity(std::string_view a, std::string_view b, bool case_fold = true);
// Token-level F1 = 2|A∩B| / (|A| + |B|) over token multisets. Both empty → 1.
double token_f1_similarity(std::string_view a, std::string_view b, bool case_fold = true);
// 1 − Levenshtein(a, b) / max(|a|, |b|) over normalized code points.
double normalized_edit_similarity(std::string_view a, std::string_view b, bool case_fold = true);
// max(cos(u, v), 0); zero vectors score 0.
double clamped_cosine(std::span<const double> u, std::span<const double> v);

class SimilarityRegistry {
 public:
  // exact_match, token_f1, normalized_edit.
  static SimilarityRegistry with_builtins();

  void add(SimilarityFunction fn);
  [[nodiscard]] bool contains(std::string_view id) const;
  // Throws InputError for unregistered ids.
  [[nodiscard]] const SimilarityFunction& get(std::string_view id) const;
  [[nodiscard]] std::vector<std::string> ids() const;

 private:
  std::map<std::string, SimilarityFunction, std::less<>> fns_;
};

// {"id": ..., "kind": ..., "case_fold": ..., "extract_pattern": ...}
nlohmann::json describe(const SimilarityFunction& fn);

}  // namespace rusgroup
