#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "illusory/dataset.hpp"

namespace illusory {

/// Which of the four question templates to use. Filtered images share the
/// illusion wording.
enum class PromptVariant { Raw, IllusionOrFiltered };

inline PromptVariant prompt_variant_for(Variant v) {
  return v == Variant::Raw ? PromptVariant::Raw : PromptVariant::IllusionOrFiltered;
}

struct PromptTemplate {
  TaskKind kind;
  PromptVariant variant;
  std::string_view text;
};

inline constexpr std::string_view kClassNamesSlot = "{class_names}";

inline constexpr PromptTemplate kPromptTemplates[] = {
    {TaskKind::Classification, PromptVariant::Raw,
     "Which class is in the picture: {class_names}. Just choose the correct class without any "
     "extra explanation."},
    {TaskKind::Char, PromptVariant::Raw,
     "What sequence of characters are in the picture? Just say the sequence. Put your answer in "
     "quotation marks."},
    {TaskKind::Classification, PromptVariant::IllusionOrFiltered,
     "There might be an illusion of something in the image or not. These are the classes that an "
     "illusion might belong to: {class_names}. Just choose the correct class without any extra "
     "explanation."},
    {TaskKind::Char, PromptVariant::IllusionOrFiltered,
     "There might be an illusion of a sequence of characters in the picture. If you cannot detect "
     "the sequence of characters, answer with \"No illusion\". If you can detect the sequence of "
     "characters, what sequence of characters are in the picture? Just say the sequence. Put your "
     "answer in quotation marks."},
};

inline const PromptTemplate& prompt_template(TaskKind kind, PromptVariant variant) {
  for (const auto& t : kPromptTemplates) {
    if (t.kind == kind && t.variant == variant) return t;
  }
  throw Error(ErrorCode::FormatError, "no prompt template");  // unreachable
}

/// Renders the question for one image. Classification prompts list the classes
/// comma-separated in label-set order; illusion and filtered prompts always end
/// the list with "No illusion". Labels are ignored for char prompts.
inline std::string build_prompt(TaskKind kind, Variant variant, const LabelSet* labels) {
  const PromptTemplate& t = prompt_template(kind, prompt_variant_for(variant));
  std::string text(t.text);
  if (kind == TaskKind::Char) return text;
  if (!labels) throw Error(ErrorCode::MissingLabels, "classification prompt needs a label set");

  const LabelSet names = labels->with_no_illusion(variant != Variant::Raw);
  std::string list;
  for (const auto& c : names.classes()) {
    if (!list.empty()) list += ", ";
    list += c;
  }
  text.replace(text.find(kClassNamesSlot), kClassNamesSlot.size(), list);
  return text;
}

}  // namespace illusory
