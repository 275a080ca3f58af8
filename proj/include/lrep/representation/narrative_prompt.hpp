#pragma once

#include <string>
#include <string_view>

namespace lrep::representation {

/// Captioning prompt for external caption producers. Captions themselves are
/// inputs (sidecar files); nothing here runs a captioning model.
inline constexpr std::string_view kNarrativePromptTemplate =
    "Give a clear, comprehensive and detailed description of the state of the objects shown in "
    "this image. For each object, mention their colors, sizes, shapes, how they are placed "
    "(upright, etc.), position within the image and relative position to other objects.\n"
    "Begin with the phrase 'In the image,'.\n"
    "Only use information that can be gained from the image.\n"
    "Mention the objects that appear in the sentence string below. If the objects in the sentence "
    "string are not present in the image, mention that they are not present.\n"
    "Sentence string: '{instruction}' .";

inline constexpr std::string_view kInstructionPlaceholder = "{instruction}";

/// Substitutes the instruction into the template.
std::string render_narrative_prompt(std::string_view instruction);

}  // namespace lrep::representation
