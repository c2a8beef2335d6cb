#pragma once

// Per-dataset prompt templates and role-aware rendering.
//
// A template is a list of segments joined by `joiner`. Segments may reference
// three placeholders:
//
//   {question}  InstructionInstance::question
//   {context}   InstructionInstance::modality1 (text modality)
//   {choices}   options joined with ", "
//
// A segment is dropped when any placeholder it references has nothing to
// render for the current role. Context the template does not mention is
// appended as "Context: ..."; options it does not mention are appended as
// "Options: A. ... B. ...".

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rusgroup/types.hpp"

namespace rusgroup {

struct PromptTemplate {
  std::string template_id;
  std::vector<std::string> segments;
  std::string joiner = " ";
  // True for templates transcribed from published dataset prompts; false for
  // the generic fallbacks.
  bool published = false;

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

struct RenderOptions {
  // Drop the question from the unimodal2 (media-only) prompt.
  bool ablate_question_for_unimodal2 = false;
  // Substitute modality2's text rendering for the media handle.
  bool media_as_text = false;
  // Render {choices} as "A. x B. y" instead of "x, y".
  bool lettered_choices = false;
};

struct RenderedPrompt {
  ModelRole role = ModelRole::multimodal;
  std::string text;
  std::optional<std::string> media;

  friend bool operator==(const RenderedPrompt&, const RenderedPrompt&) = default;
};

class PromptRegistry {
 public:
  // Templates for the HEMM datasets plus "generic_vqa" / "generic_classification".
  static PromptRegistry builtin();

  void add(PromptTemplate t);
  // Adds every template from a JSON array file; later entries win.
  void load_file(const std::filesystem::path& path);

  [[nodiscard]] bool contains(std::string_view id) const;
  // Throws InputError for unknown ids.
  [[nodiscard]] const PromptTemplate& get(std::string_view id) const;
  [[nodiscard]] std::vector<std::string> ids() const;

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

// "A. x B. y C. z", letters in input order.
std::string format_lettered_options(std::span<const std::string> options);

// Role rules: unimodal1 renders text only (no media); unimodal2 renders
// question, options and media but never modality1 text; multimodal renders
// everything. Throws InputError naming the missing field when the role cannot
// be rendered.
RenderedPrompt render_prompt(const PromptTemplate& tmpl, const InstructionInstance& instance,
                             ModelRole role, const RenderOptions& options = {});

void to_json(nlohmann::json& j, const PromptTemplate& v);
void from_json(const nlohmann::json& j, PromptTemplate& v);
void to_json(nlohmann::json& j, const RenderedPrompt& v);

}  // namespace rusgroup
