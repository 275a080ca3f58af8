#include "lrep/representation/source_registry.hpp"

#include <algorithm>
#include <unordered_set>

#include "lrep/errors.hpp"
#include "lrep/representation/feature_block.hpp"

namespace lrep::representation {

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::file: return "file";
        case Provenance::synthetic: return "synthetic";
        case Provenance::remote: return "remote";
    }
    return "file";
}

std::string_view to_string(Group g) {
    switch (g) {
        case Group::scene: return "scene";
        case Group::aligned: return "aligned";
        case Group::narrative: return "narrative";
        case Group::instruction: return "instruction";
    }
    return "scene";
}

Group group_from_string(std::string_view s) {
    if (s == "scene" || s == "SR") return Group::scene;
    if (s == "aligned" || s == "AR") return Group::aligned;
    if (s == "narrative" || s == "NR") return Group::narrative;
    if (s == "instruction") return Group::instruction;
    throw ConfigError("unknown source group '" + std::string(s) + "'");
}

std::string_view ablation_tag(Group g) {
    switch (g) {
        case Group::scene: return "SR";
        case Group::aligned: return "AR";
        case Group::narrative: return "NR";
        case Group::instruction: return "LANG";
    }
    return "SR";
}

std::vector<SourceSpec> SourceRegistry::sources_in(Group g) const {
    std::vector<SourceSpec> out;
    std::copy_if(sources_.begin(), sources_.end(), std::back_inserter(out),
                 [g](const SourceSpec& s) { return s.group == g; });
    return out;
}

const SourceSpec* SourceRegistry::find(std::string_view id) const {
    auto it = std::find_if(sources_.begin(), sources_.end(),
                           [id](const SourceSpec& s) { return s.id == id; });
    return it == sources_.end() ? nullptr : &*it;
}

const SourceSpec& SourceRegistry::at(std::string_view id) const {
    const SourceSpec* s = find(id);
    if (!s) throw ConfigError("source '" + std::string(id) + "' is not registered");
    return *s;
}

SourceRegistry SourceRegistry::restricted_to(const std::set<Group>& enabled) const {
    SourceRegistry out;
    for (const SourceSpec& s : sources_) {
        if (s.group == Group::instruction || enabled.count(s.group)) out.sources_.push_back(s);
    }
    return out;
}

nlohmann::json SourceRegistry::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const SourceSpec& s : sources_) {
        arr.push_back({{"id", s.id}, {"dim", s.dim}, {"group", std::string(to_string(s.group))}});
    }
    return arr;
}

SourceRegistry register_sources(std::vector<SourceSpec> specs) {
    std::unordered_set<std::string> seen;
    for (const SourceSpec& s : specs) {
        if (s.id.empty()) throw ConfigError("source id must not be empty");
        if (s.dim == 0) throw ConfigError("source '" + s.id + "' has zero dim");
        if (!seen.insert(s.id).second) throw ConfigError("duplicate source id '" + s.id + "'");
    }
    // Stable grouping keeps the caller's order inside each group.
    std::stable_sort(specs.begin(), specs.end(), [](const SourceSpec& a, const SourceSpec& b) {
        return static_cast<int>(a.group) < static_cast<int>(b.group);
    });
    SourceRegistry reg;
    reg.sources_ = std::move(specs);
    return reg;
}

SourceRegistry registry_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw ConfigError("source registry must be a JSON array");
    std::vector<SourceSpec> specs;
    for (const auto& e : j) {
        if (!e.contains("id") || !e.contains("dim") || !e.contains("group")) {
            throw ConfigError("source entry needs id, dim and group: " + e.dump());
        }
        const auto dim = e.at("dim").get<long long>();
        if (dim <= 0) throw ConfigError("source '" + e.at("id").get<std::string>() + "' has non-positive dim");
        specs.push_back({e.at("id").get<std::string>(), static_cast<std::size_t>(dim),
                         group_from_string(e.at("group").get<std::string>())});
    }
    return register_sources(std::move(specs));
}

std::vector<SourceSpec> default_source_specs() {
    return {
        {"vit", 768, Group::scene},
        {"dinov2", 768, Group::scene},
        {"clip_image_intermediate", 1024, Group::scene},
        {"clip_image_output", 512, Group::aligned},
        {"bert_caption", 768, Group::narrative},
        {"te3l_caption", 3072, Group::narrative},
        {"bert_instruction", 768, Group::instruction},
        {"clip_text", 512, Group::instruction},
        {"ada_instruction", 1536, Group::instruction},
    };
}

SourceRegistry default_registry() { return register_sources(default_source_specs()); }

}  // namespace lrep::representation
