#include "rusgroup/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "http.hpp"
#include "rusgroup/error.hpp"
#include "rusgroup/text.hpp"

namespace rusgroup {

using nlohmann::json;

std::string_view to_string(SimilarityKind kind) noexcept {
  switch (kind) {
    case SimilarityKind::exact_match:
      return "exact_match";
    case SimilarityKind::token_f1:
      return "token_f1";
    case SimilarityKind::normalized_edit:
      return "normalized_edit";
    case SimilarityKind::embedding_cosine:
      return "embedding_cosine";
  }
  return "?";
}

SimilarityKind parse_similarity_kind(std::string_view s) {
  for (auto k : {SimilarityKind::exact_match, SimilarityKind::token_f1,
                 SimilarityKind::normalized_edit, SimilarityKind::embedding_cosine}) {
    if (to_string(k) == s) return k;
  }
  throw InputError("unknown similarity kind: " + std::string(s));
}

// ---- raw scorers ---------------------------------------------------------

double exact_match_similarity(std::string_view a, std::string_view b, bool case_fold) {
  return text::normalize(a, case_fold) == text::normalize(b, case_fold) ? 1.0 : 0.0;
}

double token_f1_similarity(std::string_view a, std::string_view b, bool case_fold) {
  std::vector<std::string> ta = text::tokenize(a, case_fold);
  std::vector<std::string> tb = text::tokenize(b, case_fold);
  if (ta.empty() && tb.empty()) return 1.0;
  if (ta.empty() || tb.empty()) return 0.0;
  std::sort(ta.begin(), ta.end());
  std::sort(tb.begin(), tb.end());
  std::vector<std::string> common;
  std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(common));
  // Equal to 2PR/(P+R) with P = c/|B|, R = c/|A|, and symmetric by construction.
  return 2.0 * static_cast<double>(common.size()) / static_cast<double>(ta.size() + tb.size());
}

double normalized_edit_similarity(std::string_view a, std::string_view b, bool case_fold) {
  const std::u32string x = text::decode_utf8(text::normalize(a, case_fold));
  const std::u32string y = text::decode_utf8(text::normalize(b, case_fold));
  const std::size_t longest = std::max(x.size(), y.size());
  if (longest == 0) return 1.0;
  std::vector<std::size_t> prev(y.size() + 1);
  std::vector<std::size_t> cur(y.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  const double d = static_cast<double>(prev[y.size()]);
  return std::clamp(1.0 - d / static_cast<double>(longest), 0.0, 1.0);
}

double clamped_cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ProtocolError("embedding dimension mismatch", {});
  double dot = 0.0;
  double nu = 0.0;
  double nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  const double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(c, 0.0, 1.0);
}

// ---- HttpEmbedder -----------------------------------------------------

HttpEmbedder::HttpEmbedder(EmbeddingEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

std::size_t HttpEmbedder::request_count() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::vector<std::vector<double>> HttpEmbedder::embed(std::span<const std::string> texts) {
  std::lock_guard lock(mu_);
  std::vector<std::string> missing;
  std::unordered_set<std::string> queued;
  for (const auto& t : texts) {
    if (!cache_.contains(t) && queued.insert(t).second) missing.push_back(t);
  }
  if (!missing.empty()) {
    const json request{{"model", endpoint_.model_id}, {"input", missing}};
    http::RetryPolicy policy;
    policy.max_retries = endpoint_.max_retries;
    policy.initial_backoff = endpoint_.initial_backoff;
    ++requests_;
    auto [res, retries] = http::post_json_with_retries(endpoint_.endpoint_url, request.dump(),
                                                       endpoint_.timeout,
                                                       http::env_or_empty(endpoint_.api_key_env),
                                                       policy);
    json body;
    try {
      body = json::parse(res.body);
    } catch (const json::exception&) {
      throw ProtocolError("embeddings response is not JSON", res.body);
    }
    const auto data = body.find("data");
    if (data == body.end() || !data->is_array() || data->size() != missing.size()) {
      throw ProtocolError("embeddings response must carry one vector per input", res.body);
    }
    std::vector<std::vector<double>> vectors(missing.size());
    for (std::size_t i = 0; i < data->size(); ++i) {
      const json& item = (*data)[i];
      const std::size_t index = item.value("index", i);
      if (index >= vectors.size() || !item.contains("embedding") || !item["embedding"].is_array()) {
        throw ProtocolError("malformed embeddings item", res.body);
      }
      vectors[index] = item["embedding"].get<std::vector<double>>();
    }
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      if (vectors[i].empty()) throw ProtocolError("empty embedding vector", res.body);
      if (dimension_ == 0) dimension_ = vectors[i].size();
      if (vectors[i].size() != dimension_) throw ProtocolError("embedding dimension changed", res.body);
      cache_.emplace(missing[i], std::move(vectors[i]));
    }
  }
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(cache_.at(t));
  return out;
}

// ---- SimilarityFunction -----------------------------------------------

SimilarityFunction::SimilarityFunction(std::string similarity_id, SimilarityKind kind,
                                       SimilarityParams params, std::shared_ptr<Embedder> embedder)
    : id_(std::move(similarity_id)),
      kind_(kind),
      params_(std::move(params)),
      embedder_(std::move(embedder)) {
  if (id_.empty()) throw InputError("similarity function needs an id");
  if (!params_.extract_pattern.empty()) {
    try {
      extract_ = std::make_shared<const std::regex>(params_.extract_pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw InputError("bad extract_pattern for similarity '" + id_ + "': " + e.what());
    }
  }
  if (kind_ == SimilarityKind::embedding_cosine && !embedder_) {
    throw InputError("similarity '" + id_ + "' is embedding_cosine but has no embedding endpoint");
  }
}

SimilarityFunction SimilarityFunction::builtin(SimilarityKind kind) {
  return SimilarityFunction(std::string(to_string(kind)), kind);
}

std::string SimilarityFunction::prepare(std::string_view raw) const {
  if (!extract_) return std::string(raw);
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(raw.begin(), raw.end(), m, *extract_)) return std::string(raw);
  if (m.size() > 1 && m[1].matched) return m[1].str();
  return m[0].str();
}

double SimilarityFunction::score_prepared(const std::string& a, const std::string& b) const {
  switch (kind_) {
    case SimilarityKind::exact_match:
      return exact_match_similarity(a, b, params_.case_fold);
    case SimilarityKind::token_f1:
      return token_f1_similarity(a, b, params_.case_fold);
    case SimilarityKind::normalized_edit:
      return normalized_edit_similarity(a, b, params_.case_fold);
    case SimilarityKind::embedding_cosine: {
      if (text::normalize(a, params_.case_fold) == text::normalize(b, params_.case_fold)) return 1.0;
      const std::string texts[] = {a, b};
      const auto v = embedder_->embed(texts);
      return clamped_cosine(v[0], v[1]);
    }
  }
  return 0.0;
}

double SimilarityFunction::operator()(std::string_view a, std::string_view b) const {
  return score_prepared(prepare(a), prepare(b));
}

std::vector<double> SimilarityFunction::batch(
    std::span<const std::pair<std::string, std::string>> pairs) const {
  std::vector<std::pair<std::string, std::string>> prepared;
  prepared.reserve(pairs.size());
  for (const auto& [a, b] : pairs) prepared.emplace_back(prepare(a), prepare(b));

  std::vector<double> out(pairs.size());
  if (kind_ != SimilarityKind::embedding_cosine) {
    for (std::size_t i = 0; i < prepared.size(); ++i) {
      out[i] = score_prepared(prepared[i].first, prepared[i].second);
    }
    return out;
  }

  // One embedding request for every distinct text that needs a vector.
  std::vector<std::string> texts;
  std::unordered_map<std::string, std::size_t> slot;
  auto want = [&](const std::string& t) {
    if (slot.emplace(t, texts.size()).second) texts.push_back(t);
  };
  for (const auto& [a, b] : prepared) {
    if (text::normalize(a, params_.case_fold) == text::normalize(b, params_.case_fold)) continue;
    want(a);
    want(b);
  }
  const auto vectors = texts.empty() ? std::vector<std::vector<double>>{} : embedder_->embed(texts);
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    const auto& [a, b] = prepared[i];
    if (text::normalize(a, params_.case_fold) == text::normalize(b, params_.case_fold)) {
      out[i] = 1.0;
    } else {
      out[i] = clamped_cosine(vectors[slot.at(a)], vectors[slot.at(b)]);
    }
  }
  return out;
}

double score(const SimilarityFunction& fn, std::string_view a, std::string_view b) {
  return fn(a, b);
}

std::vector<double> batch_score(const SimilarityFunction& fn,
                                std::span<const std::pair<std::string, std::string>> pairs) {
  return fn.batch(pairs);
}

// ---- registry ---------------------------------------------------------------

SimilarityRegistry SimilarityRegistry::with_builtins() {
  SimilarityRegistry r;
  r.add(SimilarityFunction::builtin(SimilarityKind::exact_match));
  r.add(SimilarityFunction::builtin(SimilarityKind::token_f1));
  r.add(SimilarityFunction::builtin(SimilarityKind::normalized_edit));
  return r;
}

void SimilarityRegistry::add(SimilarityFunction fn) {
  const std::string id = fn.id();
  fns_.insert_or_assign(id, std::move(fn));
}

bool SimilarityRegistry::contains(std::string_view id) const { return fns_.find(id) != fns_.end(); }

const SimilarityFunction& SimilarityRegistry::get(std::string_view id) const {
  auto it = fns_.find(id);
  if (it == fns_.end()) throw InputError("similarity function not registered: " + std::string(id));
  return it->second;
}

std::vector<std::string> SimilarityRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, fn] : fns_) out.push_back(id);
  return out;
}

json describe(const SimilarityFunction& fn) {
  return json{{"id", fn.id()},
              {"kind", to_string(fn.kind())},
              {"case_fold", fn.params().case_fold},
              {"extract_pattern", fn.params().extract_pattern}};
}

}  // namespace rusgroup
