#include "lrep/dataset/sprt1_fixture.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string_view>

#include "lrep/errors.hpp"
#include "lrep/numerics/random.hpp"

namespace lrep::dataset {

namespace {

// 4 + 10 + 10 + 6 + 19 = 49 words.
constexpr std::array<std::string_view, 10> kColors = {"red",   "green",  "blue", "white", "brown",
                                                      "yellow", "black", "silver", "pink", "purple"};
constexpr std::array<std::string_view, 10> kNouns = {"can", "bottle", "bag",   "cup",   "bowl",
                                                     "box", "jar",    "chip",  "cloth", "plate"};
constexpr std::array<std::string_view, 3> kLevels = {"top", "middle", "bottom"};
constexpr std::array<std::string_view, 3> kPlaces = {"drawer", "shelf", "counter"};
constexpr std::array<std::string_view, 19> kItems = {"apple", "sponge", "banana", "lemon",  "pear",
                                                     "peach", "towel",  "spoon",  "knife",  "fork",
                                                     "napkin", "rag",   "orange", "lime",   "plum",
                                                     "grape", "cookie", "cracker", "mug"};

constexpr std::size_t kAny = static_cast<std::size_t>(-1);

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& words, std::size_t k, numerics::Rng& rng) {
    // The first sentences walk every list so each word occurs at least once.
    return words[k < N ? k : rng.index(N)];
}

std::string join(std::initializer_list<std::string_view> words) {
    std::string out;
    for (std::string_view w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

// Six words: "move <color noun> near <color noun>" or "pick <color noun> from <level place>".
std::string six_word(std::size_t k, numerics::Rng& rng) {
    if (k % 2 == 0)
        return join({"move", pick(kColors, k / 2, rng), pick(kNouns, k / 2, rng), "near",
                     pick(kColors, kAny, rng), pick(kNouns, kAny, rng)});
    return join({"pick", pick(kColors, k / 2, rng), pick(kNouns, k / 2, rng), "from", pick(kLevels, k / 2, rng),
                 pick(kPlaces, k / 2, rng)});
}

// Five words: "move <color noun> near <item>" or "pick <item> from <level place>".
std::string five_word(std::size_t k, numerics::Rng& rng) {
    if (k % 2 == 0)
        return join({"move", pick(kColors, kAny, rng), pick(kNouns, kAny, rng), "near", pick(kItems, k / 2, rng)});
    return join({"pick", pick(kItems, k / 2, rng), "from", pick(kLevels, kAny, rng), pick(kPlaces, kAny, rng)});
}

}  // namespace

std::vector<Episode> make_sprt1_fixture(std::uint64_t seed, const Sprt1Shape& shape) {
    const std::size_t total = shape.positives + shape.negatives;
    if (shape.six_word > total) throw ConfigError("sprt1 fixture: more six-word sentences than episodes");
    if (shape.flagged_fraction < 0.0 || shape.flagged_fraction > 1.0)
        throw ConfigError("sprt1 fixture: flagged_fraction must lie in [0, 1]");
    numerics::Rng rng(numerics::derive_seed(seed, "sprt1"));

    std::vector<std::string> sentences;
    sentences.reserve(total);
    for (std::size_t k = 0; k < shape.six_word; ++k) sentences.push_back(six_word(k, rng));
    for (std::size_t k = 0; k < total - shape.six_word; ++k) sentences.push_back(five_word(k, rng));
    rng.shuffle(std::span(sentences));

    std::vector<int> labels(total, 0);
    std::fill_n(labels.begin(), shape.positives, 1);
    rng.shuffle(std::span(labels));

    const auto flagged_target =
        static_cast<std::size_t>(std::llround(shape.flagged_fraction * static_cast<double>(shape.negatives)));
    std::vector<Episode> episodes(total);
    std::size_t flagged = 0;
    for (std::size_t i = 0; i < total; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "sprt1_%05zu", i);
        Episode& e = episodes[i];
        e.episode_id = id;
        e.instruction = std::move(sentences[i]);
        e.label = labels[i];
        const bool flag = e.label == 0 && flagged < flagged_target;
        flagged += flag ? 1 : 0;
        e.flagged_mislabel = flag;
    }
    return episodes;
}

}  // namespace lrep::dataset
