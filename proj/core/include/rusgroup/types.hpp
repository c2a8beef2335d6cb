#pragma once

// Shared domain vocabulary. Every type here is a plain value; once built it is
// never mutated, so instances can be shared across threads freely.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace rusgroup {

enum class Interaction { redundancy, uniqueness, synergy };
enum class DomainTag { healthcare, multimedia, affect, science, hci, other };
enum class GroupMethod { anchor, dp_cluster };
enum class ModelRole { unimodal1, unimodal2, multimodal };

std::string_view to_string(Interaction v) noexcept;
std::string_view to_string(DomainTag v) noexcept;
std::string_view to_string(GroupMethod v) noexcept;
std::string_view to_string(ModelRole v) noexcept;

// Parsers throw InputError on unknown names.
Interaction parse_interaction(std::string_view s);
DomainTag parse_domain_tag(std::string_view s);
GroupMethod parse_group_method(std::string_view s);
ModelRole parse_model_role(std::string_view s);

// "G_R", "G_U", "G_S".
std::string_view group_label(Interaction v) noexcept;
Interaction parse_group_label(std::string_view s);

// R, U, S in the order groups are listed in reports.
inline constexpr Interaction kAllInteractions[] = {Interaction::redundancy, Interaction::uniqueness,
                                                   Interaction::synergy};

// Anchor value of the MI score for each interaction type: 2, 1, 0.
double anchor_score(Interaction v) noexcept;

struct MediaRef {
  std::string media;  // file path or URI, never decoded here
  std::optional<std::string> text;

  friend bool operator==(const MediaRef&, const MediaRef&) = default;
};

struct InstructionInstance {
  std::string instance_id;
  std::optional<std::string> modality1;
  std::optional<MediaRef> modality2;
  std::string question;
  std::vector<std::string> options;
  std::string gold_answer;

  friend bool operator==(const InstructionInstance&, const InstructionInstance&) = default;
};

struct DatasetDescriptor {
  std::string dataset_id;
  std::string name;
  DomainTag domain_tag = DomainTag::other;
  std::optional<Interaction> declared_interaction;
  std::size_t instance_count = 0;
  std::string prompt_template_id;
  // Which concrete modality plays the role of x1 / x2 for this dataset.
  std::string modality1_kind = "text";
  std::string modality2_kind = "image";

  friend bool operator==(const DatasetDescriptor&, const DatasetDescriptor&) = default;
};

struct RoleProvenance {
  std::string model_id;
  std::string endpoint;
  std::string timestamp;  // ISO-8601 UTC of the original fetch
  bool cache_hit = false;
  int retries = 0;

  friend bool operator==(const RoleProvenance&, const RoleProvenance&) = default;
};

struct Provenance {
  RoleProvenance unimodal1;
  RoleProvenance unimodal2;
  RoleProvenance multimodal;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

// y1 = f1(x1), y2 = f2(x2), ym = fm(x1, x2) for one instance.
struct PredictionTriplet {
  std::string instance_id;
  std::string y1;
  std::string y2;
  std::string ym;
  Provenance provenance;

  friend bool operator==(const PredictionTriplet&, const PredictionTriplet&) = default;
};

struct SamplingPlan {
  std::uint32_t num_draws = 5;    // S
  std::uint32_t draw_size = 100;  // C
  std::uint64_t seed = 0;
  bool replacement_within_draw = false;

  void validate() const;
  [[nodiscard]] std::size_t effective_draw_size(std::size_t dataset_size) const noexcept;

  friend bool operator==(const SamplingPlan&, const SamplingPlan&) = default;
};

// Half-open bands on the MI score: [0, synergy_upper) is synergy,
// [synergy_upper, uniqueness_upper) uniqueness, the rest redundancy.
struct CategoryBoundaries {
  double synergy_upper = 0.5;
  double uniqueness_upper = 1.5;

  void validate() const;
  [[nodiscard]] Interaction categorize(double mi_score) const noexcept;

  friend bool operator==(const CategoryBoundaries&, const CategoryBoundaries&) = default;
};

struct MiScoreReport {
  std::string dataset_id;
  double mi_score = 0.0;
  std::vector<double> per_draw_scores;
  double std_error = 0.0;
  Interaction category = Interaction::synergy;
  std::string similarity_id;
  SamplingPlan sampling_plan;
  std::vector<std::string> warnings;

  friend bool operator==(const MiScoreReport&, const MiScoreReport&) = default;
};

struct GroupAssignment {
  GroupMethod method = GroupMethod::anchor;
  std::map<Interaction, std::vector<std::string>> groups;
  // Mean MI score of each non-empty group.
  std::map<Interaction, double> centroids;
  // Within-group sum of squared deviations from the centroid.
  std::map<Interaction, double> within_sse;
  std::vector<std::string> disagreements;

  [[nodiscard]] std::vector<std::string> members(Interaction label) const;
  [[nodiscard]] std::optional<Interaction> label_of(std::string_view dataset_id) const;
  // Disjoint groups whose union is exactly `dataset_ids`.
  [[nodiscard]] bool is_partition_of(std::span<const std::string> dataset_ids) const;

  friend bool operator==(const GroupAssignment&, const GroupAssignment&) = default;
};

struct ValidationIssue {
  std::string instance_id;
  std::string code;
  std::string message;

  friend bool operator==(const ValidationIssue&, const ValidationIssue&) = default;
};

struct ValidationReport {
  std::string dataset_id;
  std::size_t instance_count = 0;
  std::vector<ValidationIssue> errors;
  std::vector<ValidationIssue> warnings;

  [[nodiscard]] bool accepted() const noexcept { return errors.empty(); }

  friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

// Checks every instance and descriptor invariant. Violations are reported as
// data; this never throws on bad input.
ValidationReport validate_dataset(std::span<const InstructionInstance> instances,
                                  const DatasetDescriptor& descriptor);

// nlohmann/json ADL hooks.
void to_json(nlohmann::json& j, const MediaRef& v);
void from_json(const nlohmann::json& j, MediaRef& v);
void to_json(nlohmann::json& j, const InstructionInstance& v);
void from_json(const nlohmann::json& j, InstructionInstance& v);
void to_json(nlohmann::json& j, const DatasetDescriptor& v);
void from_json(const nlohmann::json& j, DatasetDescriptor& v);
void to_json(nlohmann::json& j, const RoleProvenance& v);
void from_json(const nlohmann::json& j, RoleProvenance& v);
void to_json(nlohmann::json& j, const Provenance& v);
void from_json(const nlohmann::json& j, Provenance& v);
void to_json(nlohmann::json& j, const PredictionTriplet& v);
void from_json(const nlohmann::json& j, PredictionTriplet& v);
void to_json(nlohmann::json& j, const SamplingPlan& v);
void from_json(const nlohmann::json& j, SamplingPlan& v);
void to_json(nlohmann::json& j, const CategoryBoundaries& v);
void from_json(const nlohmann::json& j, CategoryBoundaries& v);
void to_json(nlohmann::json& j, const MiScoreReport& v);
void from_json(const nlohmann::json& j, MiScoreReport& v);
void to_json(nlohmann::json& j, const GroupAssignment& v);
void from_json(const nlohmann::json& j, GroupAssignment& v);
void to_json(nlohmann::json& j, const ValidationIssue& v);
void to_json(nlohmann::json& j, const ValidationReport& v);

}  // namespace rusgroup
