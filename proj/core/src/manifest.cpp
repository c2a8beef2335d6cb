#include "rusgroup/manifest.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "rusgroup/error.hpp"
#include "rusgroup/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rusgroup {
namespace {

bool contains(std::string_view hay, std::string_view needle) { return hay.find(needle) != std::string_view::npos; }

const std::set<std::string, std::less<>> kHyperparameterKeys = {
    "finetuning_type", "per_device_train_batch_size", "learning_rate", "lr_scheduler_type",
    "num_train_epochs", "warmup_ratio",                "val_size"};

}  // namespace

ShareGptRecord to_sharegpt(const InstructionInstance& instance, const DatasetDescriptor& descriptor,
                           Interaction group, const PromptRegistry& prompts) {
  const bool has_media = instance.modality2 && !instance.modality2->media.empty();
  RenderOptions render;
  render.lettered_choices = true;
  const RenderedPrompt prompt = render_prompt(prompts.get(descriptor.prompt_template_id), instance,
                                              has_media ? ModelRole::multimodal : ModelRole::unimodal1, render);
  ShareGptRecord r;
  r.conversations.push_back({"user", prompt.text});
  r.conversations.push_back({"assistant", instance.gold_answer});
  if (has_media) r.images.push_back(instance.modality2->media);
  r.metadata = {descriptor.dataset_id, instance.instance_id, std::string(group_label(group))};
  return r;
}

std::vector<std::string> check_sharegpt(const ShareGptRecord& record, const InstructionInstance* source) {
  std::vector<std::string> problems;
  if (record.conversations.empty()) problems.push_back("no turns");
  for (std::size_t i = 0; i < record.conversations.size(); ++i) {
    const std::string& from = record.conversations[i].from;
    const char* expected = i % 2 == 0 ? "user" : "assistant";
    if (from != "user" && from != "assistant") {
      problems.push_back("turn " + std::to_string(i) + ": unknown speaker '" + from + "'");
    } else if (from != expected) {
      problems.push_back("turn " + std::to_string(i) + ": expected " + expected + ", got " + from);
    }
  }
  if (!source || record.conversations.size() < 2) return problems;

  const std::string& user = record.conversations.front().value;
  const std::string& answer = record.conversations[1].value;
  if (answer != source->gold_answer) problems.push_back("assistant turn differs from gold_answer");
  if (!source->options.empty() && !contains(user, format_lettered_options(source->options))) {
    problems.push_back("user turn lacks the lettered option block");
  }
  if (!text::trim(source->question).empty() && !contains(user, source->question)) {
    problems.push_back("user turn lacks the question");
  }
  if (source->modality1 && !source->modality1->empty() && !contains(user, *source->modality1)) {
    problems.push_back("user turn lacks the context");
  }
  std::vector<std::string> media;
  if (source->modality2 && !source->modality2->media.empty()) media.push_back(source->modality2->media);
  if (record.images != media) problems.push_back("images list does not match the instance media");
  if (record.metadata.instance_id != source->instance_id) problems.push_back("metadata.instance_id mismatch");
  return problems;
}

std::string sharegpt_to_jsonl(std::span<const ShareGptRecord> records) {
  std::string out;
  for (const auto& r : records) out += json(r).dump() + "\n";
  return out;
}

std::vector<ShareGptRecord> parse_sharegpt_jsonl(std::string_view contents) {
  std::vector<ShareGptRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    std::size_t end = contents.find('\n', pos);
    if (end == std::string_view::npos) end = contents.size();
    const std::string_view line = contents.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(json::parse(line).get<ShareGptRecord>());
    } catch (const json::exception& e) {
      throw InputError("sharegpt line " + std::to_string(line_no) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("sharegpt line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// ---- training config -------------------------------------------------------

std::string format_scientific(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific);
  const std::string s(buf, end);
  const std::size_t e = s.find('e');
  std::string mantissa = s.substr(0, e);
  if (mantissa.find('.') == std::string::npos) mantissa += ".0";
  std::string exp = s.substr(e + 1);
  std::string sign;
  if (!exp.empty() && (exp[0] == '-' || exp[0] == '+')) {
    if (exp[0] == '-') sign = "-";
    exp.erase(0, 1);
  }
  exp.erase(0, std::min(exp.find_first_not_of('0'), exp.size() - 1));
  return mantissa + "e" + sign + exp;
}

void TrainingConfig::apply_overrides(const json& overrides) {
  if (overrides.is_null()) return;
  if (!overrides.is_object()) throw InputError("training overrides must be a JSON object");
  for (const auto& [key, value] : overrides.items()) {
    if (!kHyperparameterKeys.contains(key)) throw InputError("unknown training override key: " + key);
    try {
      if (key == "finetuning_type") finetuning_type = value.get<std::string>();
      if (key == "per_device_train_batch_size") per_device_train_batch_size = value.get<int>();
      if (key == "learning_rate") learning_rate = value.get<double>();
      if (key == "lr_scheduler_type") lr_scheduler_type = value.get<std::string>();
      if (key == "num_train_epochs") num_train_epochs = value.get<int>();
      if (key == "warmup_ratio") warmup_ratio = value.get<double>();
      if (key == "val_size") val_size = value.get<double>();
    } catch (const json::exception& e) {
      throw InputError("training override " + key + ": " + e.what());
    }
    if (std::find(overridden.begin(), overridden.end(), key) == overridden.end()) overridden.push_back(key);
  }
  if (per_device_train_batch_size < 1) throw InputError("per_device_train_batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw InputError("learning_rate must be > 0");
  if (num_train_epochs < 1) throw InputError("num_train_epochs must be >= 1");
  if (warmup_ratio < 0.0 || warmup_ratio >= 1.0) throw InputError("warmup_ratio must be in [0, 1)");
  if (val_size < 0.0 || val_size >= 1.0) throw InputError("val_size must be in [0, 1)");
}

std::string TrainingConfig::render() const {
  std::string out;
  if (!overridden.empty()) {
    out += "# overridden:";
    for (const auto& k : overridden) out += " " + k;
    out += "\n";
  }
  out += "finetuning_type: " + finetuning_type + "\n";
  out += "per_device_train_batch_size: " + std::to_string(per_device_train_batch_size) + "\n";
  out += "learning_rate: " + format_scientific(learning_rate) + "\n";
  out += "lr_scheduler_type: " + lr_scheduler_type + "\n";
  out += "num_train_epochs: " + std::to_string(num_train_epochs) + "\n";
  out += "warmup_ratio: " + text::format_double(warmup_ratio) + "\n";
  out += "val_size: " + text::format_double(val_size) + "\n";
  out += "group_label: " + group_label + "\n";
  out += "manifest_path: " + manifest_path + "\n";
  return out;
}

// ---- exclusion policy ------------------------------------------------------

std::string_view to_string(ExclusionKind v) noexcept {
  switch (v) {
    case ExclusionKind::vqa_only:
      return "vqa_only";
    case ExclusionKind::pretraining_overlap:
      return "pretraining_overlap";
    case ExclusionKind::custom:
      break;
  }
  return "custom";
}

ExclusionKind parse_exclusion_kind(std::string_view s) {
  for (auto k : {ExclusionKind::vqa_only, ExclusionKind::pretraining_overlap, ExclusionKind::custom}) {
    if (to_string(k) == s) return k;
  }
  throw InputError("unknown exclusion kind: " + std::string(s));
}

ExclusionPolicy::ExclusionPolicy(std::vector<ExclusionRule> rules) : rules_(std::move(rules)) {
  std::set<std::string> ids;
  for (const auto& r : rules_) {
    if (r.rule_id.empty()) throw InputError("exclusion rule needs a rule_id");
    if (!ids.insert(r.rule_id).second) throw InputError("duplicate exclusion rule_id: " + r.rule_id);
    if (r.dataset_pattern.empty()) throw InputError("exclusion rule " + r.rule_id + " has an empty pattern");
    try {
      compiled_.emplace_back(r.dataset_pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw InputError("exclusion rule " + r.rule_id + ": bad pattern: " + e.what());
    }
  }
}

ExclusionPolicy ExclusionPolicy::load(const fs::path& path) {
  try {
    const json j = json::parse(read_file(path));
    const json& rules = j.is_array() ? j : j.at("rules");
    return ExclusionPolicy(rules.get<std::vector<ExclusionRule>>());
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

const ExclusionRule* ExclusionPolicy::match(std::string_view dataset_id) const {
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    if (std::regex_search(dataset_id.begin(), dataset_id.end(), compiled_[i])) return &rules_[i];
  }
  return nullptr;
}

// ---- group manifests -------------------------------------------------------

ManifestIndex build_group_manifests(const GroupAssignment& groups, const DatasetLoader& loader,
                                    const ExclusionPolicy& policy, const fs::path& output_dir,
                                    const PromptRegistry& prompts, const ManifestOptions& options) {
  std::set<std::string> seen;
  for (const auto& [label, members] : groups.groups) {
    for (const auto& id : members) {
      if (!seen.insert(id).second) throw InputError("dataset " + id + " appears in more than one group");
    }
  }

  ManifestIndex index;
  struct PendingFile {
    fs::path path;
    std::string contents;
  };
  std::vector<PendingFile> files;

  for (Interaction label : kAllInteractions) {
    const std::string name(group_label(label));
    std::vector<std::string> members = groups.members(label);
    std::sort(members.begin(), members.end());

    GroupManifest gm;
    gm.group_label = name;
    gm.manifest_file = name + ".sharegpt.jsonl";
    gm.config_file = name + ".train.yaml";

    std::vector<ShareGptRecord> records;
    for (const auto& id : members) {
      LoadedDataset ds;
      try {
        ds = loader(id);
      } catch (const std::exception& e) {
        throw InputError("cannot load dataset " + id + ": " + e.what());
      }
      if (ds.descriptor.dataset_id != id) {
        throw InputError("loader for " + id + " returned dataset " + ds.descriptor.dataset_id);
      }
      if (const ExclusionRule* rule = policy.match(id)) {
        index.excluded.push_back({id, name, rule->rule_id, rule->kind, rule->rationale, ds.instances.size()});
        continue;
      }
      std::sort(ds.instances.begin(), ds.instances.end(),
                [](const InstructionInstance& a, const InstructionInstance& b) { return a.instance_id < b.instance_id; });
      for (const auto& inst : ds.instances) records.push_back(to_sharegpt(inst, ds.descriptor, label, prompts));
      gm.datasets.push_back(id);
    }
    gm.instance_count = records.size();
    if (records.empty()) index.warnings.push_back("group " + name + " is empty; wrote an empty manifest");

    TrainingConfig cfg = options.base_config;
    cfg.group_label = name;
    cfg.manifest_path = gm.manifest_file;
    files.push_back({output_dir / gm.manifest_file, sharegpt_to_jsonl(records)});
    files.push_back({output_dir / gm.config_file, cfg.render()});
    index.groups.push_back(std::move(gm));
  }

  std::string audit;
  for (const auto& a : index.excluded) audit += json(a).dump() + "\n";
  files.push_back({output_dir / "audit.jsonl", audit});

  fs::create_directories(output_dir);
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr error;
  {
    const std::size_t workers = std::clamp<std::size_t>(options.parallelism, 1, files.size());
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < files.size(); i = next.fetch_add(1)) {
          try {
            write_file_atomic(files[i].path, files[i].contents);
          } catch (...) {
            std::lock_guard lock(err_mu);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);

  write_file_atomic(output_dir / "index.json", json(index).dump(2) + "\n");
  return index;
}

// ---- JSON hooks ------------------------------------------------------------

void to_json(json& j, const ShareGptTurn& v) { j = json{{"from", v.from}, {"value", v.value}}; }

void from_json(const json& j, ShareGptTurn& v) {
  v.from = j.at("from").get<std::string>();
  if (v.from != "user" && v.from != "assistant") throw InputError("unknown speaker: " + v.from);
  v.value = j.at("value").get<std::string>();
}

void to_json(json& j, const ShareGptRecord& v) {
  j = json{{"conversations", v.conversations},
           {"images", v.images},
           {"metadata",
            {{"dataset_id", v.metadata.dataset_id},
             {"instance_id", v.metadata.instance_id},
             {"group_label", v.metadata.group_label}}}};
}

void from_json(const json& j, ShareGptRecord& v) {
  v.conversations = j.at("conversations").get<std::vector<ShareGptTurn>>();
  v.images = j.value("images", std::vector<std::string>{});
  const json& m = j.at("metadata");
  v.metadata.dataset_id = m.at("dataset_id").get<std::string>();
  v.metadata.instance_id = m.at("instance_id").get<std::string>();
  v.metadata.group_label = m.at("group_label").get<std::string>();
}

void to_json(json& j, const ExclusionRule& v) {
  j = json{{"rule_id", v.rule_id},
           {"kind", to_string(v.kind)},
           {"dataset_pattern", v.dataset_pattern},
           {"rationale", v.rationale}};
}

void from_json(const json& j, ExclusionRule& v) {
  v.rule_id = j.at("rule_id").get<std::string>();
  v.kind = parse_exclusion_kind(j.at("kind").get<std::string>());
  v.dataset_pattern = j.at("dataset_pattern").get<std::string>();
  v.rationale = j.value("rationale", std::string{});
}

void to_json(json& j, const ExclusionAudit& v) {
  j = json{{"dataset_id", v.dataset_id},   {"group_label", v.group_label}, {"rule_id", v.rule_id},
           {"kind", to_string(v.kind)},     {"rationale", v.rationale},     {"instance_count", v.instance_count}};
}

void to_json(json& j, const GroupManifest& v) {
  j = json{{"group_label", v.group_label},
           {"manifest_file", v.manifest_file},
           {"config_file", v.config_file},
           {"datasets", v.datasets},
           {"instance_count", v.instance_count}};
}

void from_json(const json& j, GroupManifest& v) {
  v.group_label = j.at("group_label").get<std::string>();
  v.manifest_file = j.at("manifest_file").get<std::string>();
  v.config_file = j.at("config_file").get<std::string>();
  v.datasets = j.at("datasets").get<std::vector<std::string>>();
  v.instance_count = j.at("instance_count").get<std::size_t>();
}

void to_json(json& j, const ManifestIndex& v) {
  j = json{{"groups", v.groups}, {"excluded", v.excluded}, {"warnings", v.warnings}};
}

}  // namespace rusgroup
