#include "run_config.hpp"

#include <set>

#include "rusgroup/dataset_io.hpp"
#include "rusgroup/digest.hpp"
#include "rusgroup/error.hpp"
#include "rusgroup/manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rusgroup::cli {
namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw InputError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw InputError("unknown key in " + where + ": " + key);
  }
}

fs::path resolve(const fs::path& base, const std::string& raw) {
  const fs::path p(raw);
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

fs::path existing(const fs::path& base, const std::string& raw, const std::string& key) {
  fs::path p = resolve(base, raw);
  if (!fs::exists(p)) throw InputError(key + " does not exist: " + raw);
  return p;
}

EmbeddingEndpoint parse_embedding_endpoint(const json& j) {
  reject_unknown(j, {"endpoint_url", "model_id", "api_key_env", "timeout_ms", "max_retries", "initial_backoff_ms"},
                 "similarity endpoint");
  EmbeddingEndpoint e;
  e.endpoint_url = j.at("endpoint_url").get<std::string>();
  e.model_id = j.at("model_id").get<std::string>();
  e.api_key_env = j.value("api_key_env", std::string{});
  e.timeout = std::chrono::milliseconds(j.value("timeout_ms", e.timeout.count()));
  e.max_retries = j.value("max_retries", e.max_retries);
  e.initial_backoff = std::chrono::milliseconds(j.value("initial_backoff_ms", e.initial_backoff.count()));
  return e;
}

json describe_spec(const SimilaritySpec& s) {
  json j{{"id", s.id},
         {"kind", to_string(s.kind)},
         {"case_fold", s.params.case_fold},
         {"extract_pattern", s.params.extract_pattern}};
  if (s.endpoint) j["endpoint"] = {{"endpoint_url", s.endpoint->endpoint_url}, {"model_id", s.endpoint->model_id}};
  return j;
}

const std::set<std::string> kTopLevel = {
    "corpus_root",      "endpoints",          "similarity_id",    "similarities",  "sampling_plan",
    "category_boundaries", "k",               "group_method",     "exclusion_policy", "prompt_templates",
    "published_results", "render",            "media_root",       "training_overrides", "eval",
    "output_root",      "cache_dir",          "parallelism",      "determinism_mode"};

// Keys that locate files rather than define the experiment.
const std::set<std::string> kPathKeys = {"corpus_root", "exclusion_policy", "prompt_templates",
                                         "published_results", "media_root"};

}  // namespace

RunConfig RunConfig::load(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return from_json(j, fs::absolute(path).parent_path());
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base) {
  reject_unknown(j, kTopLevel, "run config");
  RunConfig c;
  try {
    c.corpus_root = existing(base, j.at("corpus_root").get<std::string>(), "corpus_root");
    if (!fs::is_directory(c.corpus_root)) throw InputError("corpus_root is not a directory");

    if (j.contains("endpoints")) {
      const json& e = j["endpoints"];
      reject_unknown(e, {"unimodal1", "unimodal2", "multimodal"}, "endpoints");
      RoleConfigs rc;
      for (auto [name, slot] : {std::pair{"unimodal1", &rc.unimodal1}, std::pair{"unimodal2", &rc.unimodal2},
                                std::pair{"multimodal", &rc.multimodal}}) {
        if (!e.contains(name)) throw InputError(std::string("endpoints.") + name + " is missing");
        json role = e[name];
        if (!role.contains("role")) role["role"] = name;
        *slot = role.get<ModelRoleConfig>();
      }
      c.endpoints = rc;
    }

    c.similarity_id = j.value("similarity_id", c.similarity_id);
    for (const auto& s : j.value("similarities", json::array())) {
      reject_unknown(s, {"id", "kind", "case_fold", "extract_pattern", "endpoint"}, "similarities[]");
      SimilaritySpec spec;
      spec.id = s.at("id").get<std::string>();
      spec.kind = parse_similarity_kind(s.at("kind").get<std::string>());
      spec.params.case_fold = s.value("case_fold", true);
      spec.params.extract_pattern = s.value("extract_pattern", std::string{});
      if (s.contains("endpoint")) spec.endpoint = parse_embedding_endpoint(s["endpoint"]);
      if (spec.kind == SimilarityKind::embedding_cosine && !spec.endpoint) {
        throw InputError("similarity " + spec.id + " is embedding_cosine but has no endpoint");
      }
      c.similarities.push_back(std::move(spec));
    }

    if (j.contains("sampling_plan")) {
      reject_unknown(j["sampling_plan"], {"num_draws", "draw_size", "seed", "replacement_within_draw"},
                     "sampling_plan");
      c.sampling_plan = j["sampling_plan"].get<SamplingPlan>();
    }
    if (j.contains("category_boundaries")) {
      reject_unknown(j["category_boundaries"], {"synergy_upper", "uniqueness_upper"}, "category_boundaries");
      c.category_boundaries = j["category_boundaries"].get<CategoryBoundaries>();
    }
    c.k = j.value("k", c.k);
    c.group_method = parse_group_method(j.value("group_method", std::string(to_string(c.group_method))));

    if (j.contains("exclusion_policy")) {
      c.exclusion_policy = existing(base, j["exclusion_policy"].get<std::string>(), "exclusion_policy");
    }
    if (j.contains("prompt_templates")) {
      c.prompt_templates = existing(base, j["prompt_templates"].get<std::string>(), "prompt_templates");
    }
    if (j.contains("published_results")) {
      c.published_results = existing(base, j["published_results"].get<std::string>(), "published_results");
    }
    c.media_root = j.contains("media_root") ? existing(base, j["media_root"].get<std::string>(), "media_root")
                                            : c.corpus_root;
    if (j.contains("render")) {
      const json& r = j["render"];
      reject_unknown(r, {"ablate_question_for_unimodal2", "media_as_text"}, "render");
      c.render.ablate_question_for_unimodal2 = r.value("ablate_question_for_unimodal2", false);
      c.render.media_as_text = r.value("media_as_text", false);
    }
    if (j.contains("training_overrides")) {
      c.training_overrides = j["training_overrides"];
      TrainingConfig probe;
      probe.apply_overrides(c.training_overrides);
    }
    if (j.contains("eval")) {
      reject_unknown(j["eval"], {"similarity_id", "threshold"}, "eval");
      c.eval_similarity_id = j["eval"].value("similarity_id", c.eval_similarity_id);
      c.eval_threshold = j["eval"].value("threshold", c.eval_threshold);
    }
    c.output_root = resolve(base, j.value("output_root", std::string("out")));
    c.cache_dir_explicit = j.contains("cache_dir");
    c.cache_dir = c.cache_dir_explicit ? resolve(base, j["cache_dir"].get<std::string>()) : c.output_root / "cache";
    c.parallelism = j.value("parallelism", c.parallelism);
    c.determinism_mode = j.value("determinism_mode", c.determinism_mode);
  } catch (const json::exception& e) {
    throw InputError(std::string("run config: ") + e.what());
  }

  c.sampling_plan.validate();
  c.category_boundaries.validate();
  if (c.k < 1) throw InputError("k must be >= 1");
  if (c.parallelism < 1) throw InputError("parallelism must be >= 1");
  if (c.endpoints) c.endpoints->validate(c.determinism_mode);
  (void)c.similarity_registry();
  if (c.similarity_id != "auto" && !c.similarity_registry().contains(c.similarity_id)) {
    throw InputError("similarity_id not registered: " + c.similarity_id);
  }
  if (!c.exclusion_policy.empty()) (void)ExclusionPolicy::load(c.exclusion_policy);
  if (!c.prompt_templates.empty()) (void)c.prompt_registry();

  // Canonical form: resolved experiment values, file locations as written.
  json canon;
  for (const auto& key : kPathKeys) {
    if (j.contains(key)) canon[key] = j[key];
  }
  if (c.endpoints) {
    canon["endpoints"] = {{"unimodal1", c.endpoints->unimodal1},
                          {"unimodal2", c.endpoints->unimodal2},
                          {"multimodal", c.endpoints->multimodal}};
  }
  json sims = json::array();
  for (const auto& s : c.similarities) sims.push_back(describe_spec(s));
  canon["similarities"] = sims;
  canon["render"] = {{"ablate_question_for_unimodal2", c.render.ablate_question_for_unimodal2},
                     {"media_as_text", c.render.media_as_text}};
  canon["training_overrides"] = c.training_overrides;
  canon["eval"] = {{"similarity_id", c.eval_similarity_id}, {"threshold", c.eval_threshold}};
  canon["determinism_mode"] = c.determinism_mode;
  c.canonical = canon;
  c.set_similarity(c.similarity_id);
  c.set_k(c.k);
  c.set_group_method(c.group_method);
  c.canonical["sampling_plan"] = c.sampling_plan;
  c.canonical["category_boundaries"] = c.category_boundaries;
  return c;
}

void RunConfig::set_seed(std::uint64_t seed) {
  sampling_plan.seed = seed;
  canonical["sampling_plan"] = sampling_plan;
}

void RunConfig::set_similarity(const std::string& id) {
  if (id != "auto" && !similarity_registry().contains(id)) throw InputError("similarity_id not registered: " + id);
  similarity_id = id;
  canonical["similarity_id"] = id;
}

void RunConfig::set_draws(std::uint32_t draws) {
  sampling_plan.num_draws = draws;
  sampling_plan.validate();
  canonical["sampling_plan"] = sampling_plan;
}

void RunConfig::set_draw_size(std::uint32_t size) {
  sampling_plan.draw_size = size;
  sampling_plan.validate();
  canonical["sampling_plan"] = sampling_plan;
}

void RunConfig::set_k(std::size_t value) {
  if (value < 1) throw InputError("k must be >= 1");
  k = value;
  canonical["k"] = k;
}

void RunConfig::set_group_method(GroupMethod method) {
  group_method = method;
  canonical["group_method"] = to_string(method);
}

void RunConfig::set_output_root(const fs::path& root) {
  output_root = fs::absolute(root).lexically_normal();
  if (!cache_dir_explicit) cache_dir = output_root / "cache";
}

std::string RunConfig::run_id() const { return sha256_hex(canonical.dump()).substr(0, 16); }

SimilarityRegistry RunConfig::similarity_registry() const {
  SimilarityRegistry r = SimilarityRegistry::with_builtins();
  for (const auto& s : similarities) {
    std::shared_ptr<Embedder> embedder;
    if (s.endpoint) embedder = std::make_shared<HttpEmbedder>(*s.endpoint);
    r.add(SimilarityFunction(s.id, s.kind, s.params, embedder));
  }
  return r;
}

PromptRegistry RunConfig::prompt_registry() const {
  PromptRegistry r = PromptRegistry::builtin();
  if (!prompt_templates.empty()) r.load_file(prompt_templates);
  return r;
}

}  // namespace rusgroup::cli
