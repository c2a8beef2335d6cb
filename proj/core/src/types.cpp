#include "rusgroup/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "rusgroup/error.hpp"
#include "rusgroup/text.hpp"

namespace rusgroup {

using nlohmann::json;

std::string_view to_string(Interaction v) noexcept {
  switch (v) {
    case Interaction::redundancy:
      return "redundancy";
    case Interaction::uniqueness:
      return "uniqueness";
    case Interaction::synergy:
      return "synergy";
  }
  return "?";
}

std::string_view to_string(DomainTag v) noexcept {
  switch (v) {
    case DomainTag::healthcare:
      return "healthcare";
    case DomainTag::multimedia:
      return "multimedia";
    case DomainTag::affect:
      return "affect";
    case DomainTag::science:
      return "science";
    case DomainTag::hci:
      return "hci";
    case DomainTag::other:
      return "other";
  }
  return "?";
}

std::string_view to_string(GroupMethod v) noexcept {
  return v == GroupMethod::anchor ? "anchor" : "dp_cluster";
}

std::string_view to_string(ModelRole v) noexcept {
  switch (v) {
    case ModelRole::unimodal1:
      return "unimodal1";
    case ModelRole::unimodal2:
      return "unimodal2";
    case ModelRole::multimodal:
      return "multimodal";
  }
  return "?";
}

Interaction parse_interaction(std::string_view s) {
  for (Interaction v : kAllInteractions) {
    if (to_string(v) == s) return v;
  }
  throw InputError("unknown interaction type: " + std::string(s));
}

DomainTag parse_domain_tag(std::string_view s) {
  for (DomainTag v : {DomainTag::healthcare, DomainTag::multimedia, DomainTag::affect,
                      DomainTag::science, DomainTag::hci, DomainTag::other}) {
    if (to_string(v) == s) return v;
  }
  throw InputError("unknown domain tag: " + std::string(s));
}

GroupMethod parse_group_method(std::string_view s) {
  if (s == "anchor") return GroupMethod::anchor;
  if (s == "dp_cluster") return GroupMethod::dp_cluster;
  throw InputError("unknown grouping method: " + std::string(s));
}

ModelRole parse_model_role(std::string_view s) {
  for (ModelRole v : {ModelRole::unimodal1, ModelRole::unimodal2, ModelRole::multimodal}) {
    if (to_string(v) == s) return v;
  }
  throw InputError("unknown model role: " + std::string(s));
}

std::string_view group_label(Interaction v) noexcept {
  switch (v) {
    case Interaction::redundancy:
      return "G_R";
    case Interaction::uniqueness:
      return "G_U";
    case Interaction::synergy:
      return "G_S";
  }
  return "?";
}

Interaction parse_group_label(std::string_view s) {
  for (Interaction v : kAllInteractions) {
    if (group_label(v) == s) return v;
  }
  throw InputError("unknown group label: " + std::string(s));
}

double anchor_score(Interaction v) noexcept {
  switch (v) {
    case Interaction::redundancy:
      return 2.0;
    case Interaction::uniqueness:
      return 1.0;
    case Interaction::synergy:
      return 0.0;
  }
  return 0.0;
}

void SamplingPlan::validate() const {
  if (num_draws < 1) throw InputError("sampling plan: num_draws must be >= 1");
  if (draw_size < 1) throw InputError("sampling plan: draw_size must be >= 1");
}

std::size_t SamplingPlan::effective_draw_size(std::size_t dataset_size) const noexcept {
  if (replacement_within_draw) return draw_size;
  return std::min<std::size_t>(draw_size, dataset_size);
}

void CategoryBoundaries::validate() const {
  if (!(0.0 < synergy_upper && synergy_upper < uniqueness_upper && uniqueness_upper < 2.0)) {
    throw InputError("category boundaries must satisfy 0 < synergy_upper < uniqueness_upper < 2");
  }
}

Interaction CategoryBoundaries::categorize(double mi_score) const noexcept {
  if (mi_score < synergy_upper) return Interaction::synergy;
  if (mi_score < uniqueness_upper) return Interaction::uniqueness;
  return Interaction::redundancy;
}

std::vector<std::string> GroupAssignment::members(Interaction label) const {
  auto it = groups.find(label);
  return it == groups.end() ? std::vector<std::string>{} : it->second;
}

std::optional<Interaction> GroupAssignment::label_of(std::string_view dataset_id) const {
  for (const auto& [label, ids] : groups) {
    if (std::find(ids.begin(), ids.end(), dataset_id) != ids.end()) return label;
  }
  return std::nullopt;
}

bool GroupAssignment::is_partition_of(std::span<const std::string> dataset_ids) const {
  std::multiset<std::string> seen;
  for (const auto& [label, ids] : groups) seen.insert(ids.begin(), ids.end());
  const std::multiset<std::string> expected(dataset_ids.begin(), dataset_ids.end());
  return seen == expected &&
         std::set<std::string>(expected.begin(), expected.end()).size() == expected.size();
}

ValidationReport validate_dataset(std::span<const InstructionInstance> instances,
                                  const DatasetDescriptor& descriptor) {
  ValidationReport report;
  report.dataset_id = descriptor.dataset_id;
  report.instance_count = instances.size();

  auto error = [&](const std::string& id, std::string code, std::string message) {
    report.errors.push_back({id, std::move(code), std::move(message)});
  };
  auto warn = [&](const std::string& id, std::string code, std::string message) {
    report.warnings.push_back({id, std::move(code), std::move(message)});
  };

  if (descriptor.dataset_id.empty()) error("", "empty_dataset_id", "descriptor has empty dataset_id");
  if (descriptor.instance_count != instances.size()) {
    error("", "instance_count_mismatch",
          "descriptor declares " + std::to_string(descriptor.instance_count) +
              " instances, found " + std::to_string(instances.size()));
  }

  std::unordered_set<std::string> ids;
  for (const auto& inst : instances) {
    const std::string& id = inst.instance_id;
    if (id.empty()) {
      error(id, "empty_id", "instance_id is empty");
    } else if (!ids.insert(id).second) {
      error(id, "duplicate_id", "duplicate id");
    }

    const bool has_m1 = inst.modality1.has_value() && !inst.modality1->empty();
    const bool has_m2 = inst.modality2.has_value();
    if (!has_m1 && !has_m2) error(id, "no_modality", "neither modality1 nor modality2 present");
    if (has_m2 && inst.modality2->media.empty()) {
      error(id, "empty_media", "modality2 present but media reference is empty");
    }

    if (!inst.options.empty()) {
      const std::string gold = text::normalize(inst.gold_answer);
      const bool found = std::any_of(inst.options.begin(), inst.options.end(),
                                     [&](const std::string& o) { return text::normalize(o) == gold; });
      if (!found) error(id, "gold_not_in_options", "gold not in options");
      std::set<std::string> distinct;
      for (const auto& o : inst.options) distinct.insert(text::normalize(o));
      if (distinct.size() != inst.options.size()) {
        warn(id, "duplicate_options", "options repeat after normalization");
      }
    }
    if (text::trim(inst.gold_answer).empty()) warn(id, "empty_gold", "gold_answer is empty");
    if (text::trim(inst.question).empty()) warn(id, "empty_question", "question is empty");
  }
  return report;
}

// ---- JSON --------------------------------------------------------------

namespace {

template <typename T>
std::optional<T> opt_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

json opt_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void to_json(json& j, const MediaRef& v) {
  j = json{{"media", v.media}, {"text", opt_json(v.text)}};
}

void from_json(const json& j, MediaRef& v) {
  if (j.is_string()) {
    v.media = j.get<std::string>();
    v.text.reset();
    return;
  }
  v.media = j.at("media").get<std::string>();
  v.text = opt_field<std::string>(j, "text");
}

void to_json(json& j, const InstructionInstance& v) {
  j = json{{"instance_id", v.instance_id},
           {"modality1", opt_json(v.modality1)},
           {"modality2", v.modality2 ? json(*v.modality2) : json(nullptr)},
           {"question", v.question},
           {"options", v.options},
           {"gold_answer", v.gold_answer}};
}

void from_json(const json& j, InstructionInstance& v) {
  v.instance_id = j.at("instance_id").get<std::string>();
  v.modality1 = opt_field<std::string>(j, "modality1");
  v.modality2 = opt_field<MediaRef>(j, "modality2");
  v.question = j.value("question", std::string{});
  v.options = j.value("options", std::vector<std::string>{});
  v.gold_answer = j.value("gold_answer", std::string{});
}

void to_json(json& j, const DatasetDescriptor& v) {
  j = json{{"dataset_id", v.dataset_id},
           {"name", v.name},
           {"domain_tag", to_string(v.domain_tag)},
           {"declared_interaction",
            v.declared_interaction ? json(to_string(*v.declared_interaction)) : json(nullptr)},
           {"instance_count", v.instance_count},
           {"prompt_template_id", v.prompt_template_id},
           {"modality1_kind", v.modality1_kind},
           {"modality2_kind", v.modality2_kind}};
}

void from_json(const json& j, DatasetDescriptor& v) {
  v.dataset_id = j.at("dataset_id").get<std::string>();
  v.name = j.value("name", v.dataset_id);
  v.domain_tag = parse_domain_tag(j.value("domain_tag", std::string("other")));
  if (auto d = opt_field<std::string>(j, "declared_interaction")) {
    v.declared_interaction = parse_interaction(*d);
  } else {
    v.declared_interaction.reset();
  }
  v.instance_count = j.at("instance_count").get<std::size_t>();
  v.prompt_template_id = j.value("prompt_template_id", std::string{});
  v.modality1_kind = j.value("modality1_kind", std::string("text"));
  v.modality2_kind = j.value("modality2_kind", std::string("image"));
}

void to_json(json& j, const RoleProvenance& v) {
  j = json{{"model_id", v.model_id},
           {"endpoint", v.endpoint},
           {"timestamp", v.timestamp},
           {"cache_hit", v.cache_hit},
           {"retries", v.retries}};
}

void from_json(const json& j, RoleProvenance& v) {
  v.model_id = j.value("model_id", std::string{});
  v.endpoint = j.value("endpoint", std::string{});
  v.timestamp = j.value("timestamp", std::string{});
  v.cache_hit = j.value("cache_hit", false);
  v.retries = j.value("retries", 0);
}

void to_json(json& j, const Provenance& v) {
  j = json{{"unimodal1", v.unimodal1}, {"unimodal2", v.unimodal2}, {"multimodal", v.multimodal}};
}

void from_json(const json& j, Provenance& v) {
  v.unimodal1 = j.at("unimodal1").get<RoleProvenance>();
  v.unimodal2 = j.at("unimodal2").get<RoleProvenance>();
  v.multimodal = j.at("multimodal").get<RoleProvenance>();
}

void to_json(json& j, const PredictionTriplet& v) {
  j = json{{"instance_id", v.instance_id},
           {"y1", v.y1},
           {"y2", v.y2},
           {"ym", v.ym},
           {"provenance", v.provenance}};
}

void from_json(const json& j, PredictionTriplet& v) {
  v.instance_id = j.at("instance_id").get<std::string>();
  // Empty output is legal; a missing key is not.
  v.y1 = j.at("y1").get<std::string>();
  v.y2 = j.at("y2").get<std::string>();
  v.ym = j.at("ym").get<std::string>();
  if (auto it = j.find("provenance"); it != j.end() && !it->is_null()) {
    v.provenance = it->get<Provenance>();
  } else {
    v.provenance = {};
  }
}

void to_json(json& j, const SamplingPlan& v) {
  j = json{{"num_draws", v.num_draws},
           {"draw_size", v.draw_size},
           {"seed", v.seed},
           {"replacement_within_draw", v.replacement_within_draw}};
}

void from_json(const json& j, SamplingPlan& v) {
  SamplingPlan d;
  v.num_draws = j.value("num_draws", d.num_draws);
  v.draw_size = j.value("draw_size", d.draw_size);
  v.seed = j.value("seed", d.seed);
  v.replacement_within_draw = j.value("replacement_within_draw", d.replacement_within_draw);
}

void to_json(json& j, const CategoryBoundaries& v) {
  j = json{{"synergy_upper", v.synergy_upper}, {"uniqueness_upper", v.uniqueness_upper}};
}

void from_json(const json& j, CategoryBoundaries& v) {
  CategoryBoundaries d;
  v.synergy_upper = j.value("synergy_upper", d.synergy_upper);
  v.uniqueness_upper = j.value("uniqueness_upper", d.uniqueness_upper);
}

void to_json(json& j, const MiScoreReport& v) {
  j = json{{"dataset_id", v.dataset_id},
           {"mi_score", v.mi_score},
           {"per_draw_scores", v.per_draw_scores},
           {"std_error", v.std_error},
           {"category", to_string(v.category)},
           {"similarity_id", v.similarity_id},
           {"sampling_plan", v.sampling_plan},
           {"warnings", v.warnings}};
}

void from_json(const json& j, MiScoreReport& v) {
  v.dataset_id = j.at("dataset_id").get<std::string>();
  v.mi_score = j.at("mi_score").get<double>();
  v.per_draw_scores = j.value("per_draw_scores", std::vector<double>{});
  v.std_error = j.value("std_error", 0.0);
  v.category = parse_interaction(j.at("category").get<std::string>());
  v.similarity_id = j.value("similarity_id", std::string{});
  v.sampling_plan = j.value("sampling_plan", SamplingPlan{});
  v.warnings = j.value("warnings", std::vector<std::string>{});
}

void to_json(json& j, const GroupAssignment& v) {
  json groups = json::object();
  json centroids = json::object();
  json sse = json::object();
  for (Interaction label : kAllInteractions) {
    const std::string key(group_label(label));
    groups[key] = v.members(label);
    if (auto it = v.centroids.find(label); it != v.centroids.end()) centroids[key] = it->second;
    if (auto it = v.within_sse.find(label); it != v.within_sse.end()) sse[key] = it->second;
  }
  j = json{{"method", to_string(v.method)},
           {"groups", groups},
           {"centroids", centroids},
           {"within_sse", sse},
           {"disagreements", v.disagreements}};
}

void from_json(const json& j, GroupAssignment& v) {
  v = GroupAssignment{};
  v.method = parse_group_method(j.at("method").get<std::string>());
  for (const auto& [key, ids] : j.at("groups").items()) {
    v.groups[parse_group_label(key)] = ids.get<std::vector<std::string>>();
  }
  for (Interaction label : kAllInteractions) v.groups.try_emplace(label);
  if (auto it = j.find("centroids"); it != j.end()) {
    for (const auto& [key, c] : it->items()) v.centroids[parse_group_label(key)] = c.get<double>();
  }
  if (auto it = j.find("within_sse"); it != j.end()) {
    for (const auto& [key, c] : it->items()) v.within_sse[parse_group_label(key)] = c.get<double>();
  }
  v.disagreements = j.value("disagreements", std::vector<std::string>{});
}

void to_json(json& j, const ValidationIssue& v) {
  j = json{{"instance_id", v.instance_id}, {"code", v.code}, {"message", v.message}};
}

void to_json(json& j, const ValidationReport& v) {
  j = json{{"dataset_id", v.dataset_id},
           {"instance_count", v.instance_count},
           {"accepted", v.accepted()},
           {"errors", v.errors},
           {"warnings", v.warnings}};
}

}  // namespace rusgroup
