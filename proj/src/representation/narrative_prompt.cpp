#include "lrep/representation/narrative_prompt.hpp"

namespace lrep::representation {

std::string render_narrative_prompt(std::string_view instruction) {
    std::string out(kNarrativePromptTemplate);
    const auto pos = out.find(kInstructionPlaceholder);
    out.replace(pos, kInstructionPlaceholder.size(), instruction);
    return out;
}

}  // namespace lrep::representation
