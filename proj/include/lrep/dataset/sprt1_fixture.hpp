#pragma once

#include <cstdint>
#include <vector>

#include "lrep/dataset/episode.hpp"

namespace lrep::dataset {

/// Shape of the SP-RT-1 manifest: counts, vocabulary and sentence lengths.
struct Sprt1Shape {
    std::size_t positives = 10000;
    std::size_t negatives = 3915;
    std::size_t six_word = 9215;   // the rest have five words
    double flagged_fraction = 0.436;
};

/// Synthetic manifest with the given shape over a fixed 49-word vocabulary.
/// Episode ids are "sprt1_00000".., flagged negatives carry
/// flagged_mislabel = true, every other episode false.
std::vector<Episode> make_sprt1_fixture(std::uint64_t seed, const Sprt1Shape& shape = {});

/// Environment variable naming a real SP-RT-1 manifest, if one is available.
inline constexpr const char* kSprt1ManifestEnv = "LREP_SPRT1_MANIFEST";

}  // namespace lrep::dataset
