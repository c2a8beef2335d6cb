#include "rusgroup/prompts.hpp"

#include <nlohmann/json.hpp>

#include "rusgroup/dataset_io.hpp"
#include "rusgroup/error.hpp"
#include "rusgroup/text.hpp"

namespace rusgroup {

using nlohmann::json;

namespace {

constexpr std::string_view kQuestion = "{question}";
constexpr std::string_view kContext = "{context}";
constexpr std::string_view kChoices = "{choices}";

PromptTemplate published(std::string id, std::vector<std::string> segments, std::string joiner = "\n") {
  return PromptTemplate{std::move(id), std::move(segments), std::move(joiner), true};
}

PromptTemplate fallback(std::string id, std::vector<std::string> segments) {
  return PromptTemplate{std::move(id), std::move(segments), "\n", false};
}

bool mentions(const PromptTemplate& t, std::string_view placeholder) {
  for (const auto& s : t.segments) {
    if (s.find(placeholder) != std::string::npos) return true;
  }
  return false;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

std::string join_options(std::span<const std::string> options) {
  std::string out;
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (i) out += ", ";
    out += options[i];
  }
  return out;
}

}  // namespace

PromptRegistry PromptRegistry::builtin() {
  PromptRegistry r;
  r.add(published("vqa", {"You are given an image and a question.", "Answer the question in a single word.",
                          "Question: {question}"},
                  " "));
  r.add(published("decimer",
                  {"Simplified molecular-input line-entry system (SMILES) notation of the given molecule:"}));
  r.add(published(
      "scienceqa",
      {"You are given a question and a set of answer choices. Contextual information and an image are "
       "provided to assist in understanding the question. Additionally, lecture notes may be available to "
       "support your reasoning. Your task is to choose the best answer from the comma-separated choices. "
       "Return the selected choice exactly as it appears.",
       "question: {question}", "context: {context}", "choices: {choices}", "Answer:"}));
  r.add(published("slake", {"Answer the question in a single word,", "Question: {question}"}, " "));
  r.add(published(
      "ucmerced",
      {"You are given an image. Classify whether it belongs to one of the following categories: "
       "mediumresidential, buildings, tenniscourt, denseresidential, baseballdiamond, intersection, harbor, "
       "parkinglot, river, overpass, mobilehomepark, runway, forest, beach, freeway, airplane, storagetanks, "
       "chaparral, golfcourse, sparseresidential, agricultural. Choose one class from the list."}));
  r.add(published(
      "enrico",
      {"You are given a screenshot of a mobile application's user interface. Choose the most appropriate "
       "design topic from the following comma-separated options: bare, dialer, camera, chat, editor, form, "
       "gallery, list, login, maps, mediaplayer, menu, modal, news, other, profile, search, settings, terms, "
       "tutorial."}));
  r.add(published(
      "mmimdb",
      {"You are given a movie poster and its corresponding plot. Select the appropriate genres from the "
       "following comma-separated list: drama, comedy, romance, thriller, crime, action, adventure, horror, "
       "documentary, mystery, sci-fi, fantasy, family, biography, war, history, music, animation, musical, "
       "western, sport, short, film-noir.",
       "Plot: {context}",
       "Note: A movie may belong to multiple genres. Provide all applicable genres, separated by commas."}));
  r.add(published("vqarad", {"You are given a radiology image and a question. Answer the question in a single word.",
                             "Question: {question}"}));
  r.add(published("flickr30k", {"A picture of"}));
  r.add(published("fer2013",
                  {"Given a photo of a face, determine the facial expression. Choose from the following options: "
                   "angry, disgust, fear, happy, neutral, sad, surprise. Answer in a single word."}));
  r.add(published("ny_cartoon", {"You are given a cartoon image and a caption. Start your answer with “Yes” "
                                 "if the caption is funny, or “No” if it is not.",
                                 "Caption: {context}"}));
  r.add(published("magicbrush", {"Edit the given image based on the provided instruction.",
                                 "Instruction: {question}"}));
  r.add(published("memecap", {"This is a meme with the title {question}.", "The image description is {context}.",
                              "What is the meme poster trying to convey?", "Answer:"},
                  " "));
  r.add(published(
      "hateful_memes",
      {"You are given an image. The image and the accompanying text phrase may appear innocuous individually, "
       "but together may convey a hateful message.",
       "Text phrase: {context}",
       "Judge whether the combination of image and text is hateful. Begin your answer with either \"yes\" or "
       "\"no\", where \"yes\" indicates the meme is hateful and \"no\" indicates it is not.",
       "Answer:"}));
  r.add(published("inaturalist", {"The scientific species name of the species present in the image is:"}));
  r.add(published("nlvr", {"Given an image and a related question, answer with a single word: either "
                           "“true” or “false.”",
                           "Question: {question}"}));
  r.add(published(
      "resisc45",
      {"You are given an image. Classify whether it belongs to one of the following categories:",
       "'basketball_court', 'overpass', 'ground_track_field', 'church', 'chaparral', 'forest', 'parking_lot', "
       "'golf_course', 'baseball_diamond', 'meadow', 'beach', 'sparse_residential', 'desert', 'terrace', "
       "'palace', 'bridge', 'commercial_area', 'stadium', 'runway', 'lake', 'railway', 'tennis_court', 'ship', "
       "'intersection', 'river', 'freeway', 'airplane', 'industrial_area', 'mountain', 'storage_tank', 'cloud', "
       "'roundabout', 'wetland', 'mobile_home_park', 'island', 'harbor', 'railway_station', "
       "'medium_residential', 'sea_ice', 'thermal_power_station', 'snowberg', 'circular_farmland', 'airport', "
       "'dense_residential', 'rectangular_farmland'.",
       "Choose a class from the above list."}));
  r.add(published("lncoco", {"Generate an image based on the provided caption.", "Caption: {context}"}));

  // No published prompt for these; generic fallbacks.
  const std::vector<std::string> vqa_like = {"Answer the question in a single word.", "Question: {question}"};
  const std::vector<std::string> open_like = {"Question: {question}"};
  r.add(fallback("generic_vqa", vqa_like));
  r.add(fallback("generic_classification", open_like));
  r.add(fallback("pathvqa", vqa_like));
  r.add(fallback("ok-vqa", vqa_like));
  r.add(fallback("memotion", open_like));
  r.add(fallback("screen2words", open_like));
  r.add(fallback("irfl", open_like));
  return r;
}

void PromptRegistry::add(PromptTemplate t) {
  if (t.template_id.empty()) throw InputError("prompt template needs a template_id");
  const std::string id = t.template_id;
  templates_.insert_or_assign(id, std::move(t));
}

void PromptRegistry::load_file(const std::filesystem::path& path) {
  try {
    const json j = json::parse(read_file(path));
    if (!j.is_array()) throw InputError(path.string() + ": expected a JSON array of templates");
    for (const auto& item : j) add(item.get<PromptTemplate>());
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

bool PromptRegistry::contains(std::string_view id) const { return templates_.find(id) != templates_.end(); }

const PromptTemplate& PromptRegistry::get(std::string_view id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw InputError("prompt template not registered: " + std::string(id));
  return it->second;
}

std::vector<std::string> PromptRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, t] : templates_) out.push_back(id);
  return out;
}

std::string format_lettered_options(std::span<const std::string> options) {
  std::string out;
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (i) out += ' ';
    // A..Z, then AA, AB, ... for long option lists.
    std::string letter;
    for (std::size_t n = i + 1; n > 0; n = (n - 1) / 26) {
      letter.insert(letter.begin(), static_cast<char>('A' + (n - 1) % 26));
    }
    out += letter + ". " + options[i];
  }
  return out;
}

RenderedPrompt render_prompt(const PromptTemplate& tmpl, const InstructionInstance& instance, ModelRole role,
                             const RenderOptions& options) {
  const bool has_m1 = instance.modality1 && !instance.modality1->empty();
  const bool has_question = !text::trim(instance.question).empty();

  RenderedPrompt out;
  out.role = role;

  const bool use_context = role != ModelRole::unimodal2 && has_m1;
  const bool use_question =
      has_question && !(role == ModelRole::unimodal2 && options.ablate_question_for_unimodal2);
  const bool use_choices = !instance.options.empty();

  std::string media_text;
  if (role == ModelRole::unimodal1) {
    if (!has_m1 && !has_question) {
      throw InputError("instance " + instance.instance_id +
                       ": unimodal1 prompt needs modality1 (or question) text");
    }
  } else {
    if (!instance.modality2 || instance.modality2->media.empty()) {
      throw InputError("instance " + instance.instance_id + ": " + std::string(to_string(role)) +
                       " prompt needs modality2.media");
    }
    if (options.media_as_text) {
      if (!instance.modality2->text || instance.modality2->text->empty()) {
        throw InputError("instance " + instance.instance_id + ": media_as_text needs modality2.text");
      }
      media_text = *instance.modality2->text;
    } else {
      out.media = instance.modality2->media;
    }
  }

  std::vector<std::string> parts;
  for (const auto& seg : tmpl.segments) {
    const bool needs_q = seg.find(kQuestion) != std::string::npos;
    const bool needs_c = seg.find(kContext) != std::string::npos;
    const bool needs_ch = seg.find(kChoices) != std::string::npos;
    if ((needs_q && !use_question) || (needs_c && !use_context) || (needs_ch && !use_choices)) continue;
    std::string s = seg;
    if (needs_q) replace_all(s, kQuestion, instance.question);
    if (needs_c) replace_all(s, kContext, *instance.modality1);
    if (needs_ch) {
      replace_all(s, kChoices,
                  options.lettered_choices ? format_lettered_options(instance.options) : join_options(instance.options));
    }
    parts.push_back(std::move(s));
  }
  if (use_question && !mentions(tmpl, kQuestion)) parts.push_back("Question: " + instance.question);
  if (use_context && !mentions(tmpl, kContext)) parts.push_back("Context: " + *instance.modality1);
  if (use_choices && !mentions(tmpl, kChoices)) {
    parts.push_back("Options: " + format_lettered_options(instance.options));
  }
  if (!media_text.empty()) parts.push_back("Image: " + media_text);

  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.text += tmpl.joiner;
    out.text += parts[i];
  }
  return out;
}

void to_json(json& j, const PromptTemplate& v) {
  j = json{{"template_id", v.template_id}, {"segments", v.segments}, {"joiner", v.joiner}, {"published", v.published}};
}

void from_json(const json& j, PromptTemplate& v) {
  v.template_id = j.at("template_id").get<std::string>();
  v.segments = j.at("segments").get<std::vector<std::string>>();
  v.joiner = j.value("joiner", std::string("\n"));
  v.published = j.value("published", false);
}

void to_json(json& j, const RenderedPrompt& v) {
  j = json{{"role", to_string(v.role)}, {"text", v.text}, {"media", v.media ? json(*v.media) : json(nullptr)}};
}

}  // namespace rusgroup
