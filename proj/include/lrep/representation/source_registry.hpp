#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace lrep::representation {

/// Which part of the model input a source feeds. Scene, aligned and narrative
/// make up the per-image representation; instruction sources make up the
/// language feature.
enum class Group { scene, aligned, narrative, instruction };

std::string_view to_string(Group g);
Group group_from_string(std::string_view s);

/// Short ablation tags: SR, AR, NR.
std::string_view ablation_tag(Group g);

struct SourceSpec {
    std::string id;
    std::size_t dim = 0;
    Group group = Group::scene;

    friend bool operator==(const SourceSpec&, const SourceSpec&) = default;
};

/// Immutable, validated list of embedding sources. Order within a group is
/// the order tokens are emitted in.
class SourceRegistry {
public:
    const std::vector<SourceSpec>& sources() const noexcept { return sources_; }
    std::vector<SourceSpec> sources_in(Group g) const;
    const SourceSpec* find(std::string_view id) const;
    const SourceSpec& at(std::string_view id) const;
    std::size_t size() const noexcept { return sources_.size(); }

    /// Keeps instruction sources plus the image groups listed in `enabled`.
    SourceRegistry restricted_to(const std::set<Group>& enabled) const;

    nlohmann::json to_json() const;

    friend bool operator==(const SourceRegistry&, const SourceRegistry&) = default;

private:
    friend SourceRegistry register_sources(std::vector<SourceSpec> specs);
    std::vector<SourceSpec> sources_;
};

/// Validates ids (unique, non-empty) and dims (positive).
SourceRegistry register_sources(std::vector<SourceSpec> specs);
SourceRegistry registry_from_json(const nlohmann::json& j);

/// vit, dinov2, clip_image_intermediate | clip_image_output |
/// bert_caption, te3l_caption | bert_instruction, clip_text, ada_instruction.
std::vector<SourceSpec> default_source_specs();
SourceRegistry default_registry();

}  // namespace lrep::representation
