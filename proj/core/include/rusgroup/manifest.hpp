#pragma once

// Per-group instruction-tuning artifacts:
//
//   <out>/G_R.sharegpt.jsonl   one ShareGptRecord per line
//   <out>/G_R.train.yaml       flat key: value hyperparameters
//   <out>/audit.jsonl          one line per excluded dataset
//   <out>/index.json           ManifestIndex
//
// Images travel in the record's "images" list, never inlined in the text.

#include <filesystem>
#include <functional>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rusgroup/dataset_io.hpp"
#include "rusgroup/prompts.hpp"
#include "rusgroup/types.hpp"

namespace rusgroup {

struct ShareGptTurn {
  std::string from;  // "user" or "assistant"
  std::string value;

  friend bool operator==(const ShareGptTurn&, const ShareGptTurn&) = default;
};

struct ShareGptMetadata {
  std::string dataset_id;
  std::string instance_id;
  std::string group_label;

  friend bool operator==(const ShareGptMetadata&, const ShareGptMetadata&) = default;
};

struct ShareGptRecord {
  std::vector<ShareGptTurn> conversations;
  std::vector<std::string> images;
  ShareGptMetadata metadata;

  friend bool operator==(const ShareGptRecord&, const ShareGptRecord&) = default;
};

// User turn: the dataset prompt rendered for the multimodal role (text-only
// role when the instance has no media) with options lettered in input order.
// Assistant turn: gold_answer.
ShareGptRecord to_sharegpt(const InstructionInstance& instance, const DatasetDescriptor& descriptor,
                           Interaction group, const PromptRegistry& prompts);

// Structural problems: empty, non-alternating, not starting with user, unknown
// speaker. With `source`, also checks the gold answer, option block and images.
std::vector<std::string> check_sharegpt(const ShareGptRecord& record,
                                        const InstructionInstance* source = nullptr);

std::string sharegpt_to_jsonl(std::span<const ShareGptRecord> records);
// Throws InputError (with the line number) on malformed lines.
std::vector<ShareGptRecord> parse_sharegpt_jsonl(std::string_view contents);

struct TrainingConfig {
  std::string finetuning_type = "LoRA";
  int per_device_train_batch_size = 2;
  double learning_rate = 1e-4;
  std::string lr_scheduler_type = "cosine";
  int num_train_epochs = 3;
  double warmup_ratio = 0.1;
  double val_size = 0.1;
  std::string group_label;
  std::string manifest_path;
  // Keys changed by apply_overrides, in application order.
  std::vector<std::string> overridden;

  // Accepts the hyperparameter keys only; unknown keys are an InputError.
  void apply_overrides(const nlohmann::json& overrides);
  // Overridden keys are listed in a leading comment.
  [[nodiscard]] std::string render() const;

  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

// "1.0e-4" style: mantissa always carries a decimal point, exponent unpadded.
std::string format_scientific(double v);

enum class ExclusionKind { vqa_only, pretraining_overlap, custom };

std::string_view to_string(ExclusionKind v) noexcept;
ExclusionKind parse_exclusion_kind(std::string_view s);

struct ExclusionRule {
  std::string rule_id;
  ExclusionKind kind = ExclusionKind::custom;
  // ECMAScript regex searched within the dataset_id.
  std::string dataset_pattern;
  std::string rationale;

  friend bool operator==(const ExclusionRule&, const ExclusionRule&) = default;
};

class ExclusionPolicy {
 public:
  ExclusionPolicy() = default;
  explicit ExclusionPolicy(std::vector<ExclusionRule> rules);

  // {"rules": [...]} JSON file.
  static ExclusionPolicy load(const std::filesystem::path& path);

  // First matching rule, or null.
  [[nodiscard]] const ExclusionRule* match(std::string_view dataset_id) const;
  [[nodiscard]] const std::vector<ExclusionRule>& rules() const noexcept { return rules_; }

 private:
  std::vector<ExclusionRule> rules_;
  std::vector<std::regex> compiled_;
};

struct ExclusionAudit {
  std::string dataset_id;
  std::string group_label;
  std::string rule_id;
  ExclusionKind kind = ExclusionKind::custom;
  std::string rationale;
  std::size_t instance_count = 0;

  friend bool operator==(const ExclusionAudit&, const ExclusionAudit&) = default;
};

struct GroupManifest {
  std::string group_label;
  std::string manifest_file;  // relative to the output directory
  std::string config_file;
  std::vector<std::string> datasets;  // included, sorted
  std::size_t instance_count = 0;

  friend bool operator==(const GroupManifest&, const GroupManifest&) = default;
};

struct ManifestIndex {
  std::vector<GroupManifest> groups;  // G_R, G_U, G_S
  std::vector<ExclusionAudit> excluded;
  std::vector<std::string> warnings;

  friend bool operator==(const ManifestIndex&, const ManifestIndex&) = default;
};

using DatasetLoader = std::function<LoadedDataset(const std::string& dataset_id)>;

struct ManifestOptions {
  TrainingConfig base_config;
  std::size_t parallelism = 3;
};

// Loader failures are rethrown as InputError naming the dataset.
ManifestIndex build_group_manifests(const GroupAssignment& groups, const DatasetLoader& loader,
                                    const ExclusionPolicy& policy, const std::filesystem::path& output_dir,
                                    const PromptRegistry& prompts, const ManifestOptions& options = {});

void to_json(nlohmann::json& j, const ShareGptTurn& v);
void from_json(const nlohmann::json& j, ShareGptTurn& v);
void to_json(nlohmann::json& j, const ShareGptRecord& v);
void from_json(const nlohmann::json& j, ShareGptRecord& v);
void to_json(nlohmann::json& j, const ExclusionRule& v);
void from_json(const nlohmann::json& j, ExclusionRule& v);
void to_json(nlohmann::json& j, const ExclusionAudit& v);
void to_json(nlohmann::json& j, const GroupManifest& v);
void from_json(const nlohmann::json& j, GroupManifest& v);
void to_json(nlohmann::json& j, const ManifestIndex& v);

}  // namespace rusgroup
