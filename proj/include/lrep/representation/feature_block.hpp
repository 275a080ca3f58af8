#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace lrep::representation {

enum class Provenance { file, synthetic, remote };

std::string_view to_string(Provenance p);

/// One embedding vector from one named external source.
struct FeatureBlock {
    std::string source_id;
    std::vector<float> values;
    Provenance provenance = Provenance::file;

    std::size_t dim() const noexcept { return values.size(); }

    friend bool operator==(const FeatureBlock&, const FeatureBlock&) = default;
};

/// Phase references used in the feature-store layout. Video frames use
/// arbitrary phase names (e.g. "frame_03").
namespace phase {
inline constexpr std::string_view before = "before";
inline constexpr std::string_view after = "after";
inline constexpr std::string_view instruction = "instruction";
}  // namespace phase

}  // namespace lrep::representation
