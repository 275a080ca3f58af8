#include "lrep/dataset/episode.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "lrep/errors.hpp"
#include "lrep/numerics/random.hpp"
#include "lrep/representation/lrep_io.hpp"

namespace lrep::dataset {

using nlohmann::json;

void Episode::validate() const {
    if (episode_id.empty()) throw ConfigError("episode_id must be non-empty");
    if (label != 0 && label != 1)
        throw ConfigError("episode '" + episode_id + "': label must be 0 or 1");
    if (!frames.empty() && frames.size() < 2)
        throw ConfigError("episode '" + episode_id + "': frames needs at least 2 entries");
}

json to_json(const Episode& e) {
    json j = {{"episode_id", e.episode_id}, {"instruction", e.instruction}, {"label", e.label}};
    if (e.before_ref != "before") j["before"] = e.before_ref;
    if (e.after_ref != "after") j["after"] = e.after_ref;
    if (e.flagged_mislabel) j["flagged_mislabel"] = *e.flagged_mislabel;
    if (!e.frames.empty()) j["frames"] = e.frames;
    return j;
}

namespace {

template <typename T>
T required(const json& j, const char* field) {
    if (!j.contains(field)) throw ConfigError(std::string("missing field '") + field + "'");
    try {
        return j.at(field).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("field '") + field + "' has the wrong type");
    }
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* field) {
    if (!j.contains(field) || j.at(field).is_null()) return std::nullopt;
    try {
        return j.at(field).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("field '") + field + "' has the wrong type");
    }
}

}  // namespace

Episode episode_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("episode must be a JSON object");
    Episode e;
    e.episode_id = required<std::string>(j, "episode_id");
    e.instruction = required<std::string>(j, "instruction");
    e.label = required<int>(j, "label");
    e.flagged_mislabel = optional_field<bool>(j, "flagged_mislabel");
    e.frames = optional_field<std::vector<std::string>>(j, "frames").value_or(std::vector<std::string>{});
    if (!e.frames.empty()) {
        e.before_ref = e.frames.front();
        e.after_ref = e.frames.back();
    }
    if (auto b = optional_field<std::string>(j, "before")) e.before_ref = *b;
    if (auto a = optional_field<std::string>(j, "after")) e.after_ref = *a;
    e.validate();
    return e;
}

std::vector<Episode> parse_manifest(std::string_view text) {
    std::vector<Episode> out;
    std::unordered_set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        Episode e;
        try {
            e = episode_from_json(json::parse(line));
        } catch (const json::parse_error& err) {
            throw ParseError(std::string("invalid JSON: ") + err.what(), line_no);
        } catch (const ConfigError& err) {
            throw ParseError(err.what(), line_no);
        }
        if (!seen.insert(e.episode_id).second)
            throw ParseError("duplicate episode_id '" + e.episode_id + "'", line_no);
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<Episode> load_manifest(const std::filesystem::path& path) {
    return parse_manifest(representation::read_file(path));
}

void write_manifest(const std::filesystem::path& path, std::span<const Episode> episodes) {
    std::string text;
    for (const Episode& e : episodes) {
        text += to_json(e).dump();
        text += '\n';
    }
    representation::write_file(path, text);
}

std::vector<std::string> instruction_pool(std::span<const Episode> episodes) {
    std::vector<std::string> pool;
    std::unordered_set<std::string_view> seen;
    for (const Episode& e : episodes)
        if (seen.insert(e.instruction).second) pool.push_back(e.instruction);
    return pool;
}

std::vector<Episode> cleanse_negatives(std::vector<Episode> episodes, std::span<const std::string> pool,
                                       std::uint64_t seed) {
    if (pool.empty()) throw ConfigError("cleanse_negatives: instruction pool is empty");
    numerics::Rng rng(numerics::derive_seed(seed, "cleanse"));
    for (Episode& e : episodes) {
        if (!e.flagged_mislabel.value_or(false)) continue;
        if (e.label != 0)
            throw ConfigError("cleanse_negatives: flagged episode '" + e.episode_id + "' is not a negative");
        const auto own = std::find(pool.begin(), pool.end(), e.instruction);
        const std::size_t candidates = pool.size() - (own == pool.end() ? 0 : 1);
        if (candidates == 0)
            throw ConfigError("cleanse_negatives: no alternative instruction for '" + e.episode_id + "'");
        std::size_t k = rng.index(candidates);
        if (own != pool.end() && k >= static_cast<std::size_t>(own - pool.begin())) ++k;
        e.instruction = pool[k];
    }
    return episodes;
}

json to_json(const DatasetSplit& s) {
    return {{"seed", s.seed}, {"train", s.train}, {"val", s.val}, {"test", s.test}};
}

DatasetSplit split_from_json(const json& j) {
    try {
        return {j.at("train").get<std::vector<std::string>>(), j.at("val").get<std::vector<std::string>>(),
                j.at("test").get<std::vector<std::string>>(), j.value("seed", std::uint64_t{0})};
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid split: ") + e.what());
    }
}

namespace {

std::vector<std::string> ids_of(std::span<const Episode> episodes, int label_filter) {
    std::vector<std::string> ids;
    for (const Episode& e : episodes)
        if (label_filter < 0 || e.label == label_filter) ids.push_back(e.episode_id);
    return ids;
}

void append(std::vector<std::string>& dst, const std::vector<std::string>& src, std::size_t from,
            std::size_t count) {
    dst.insert(dst.end(), src.begin() + static_cast<std::ptrdiff_t>(from),
               src.begin() + static_cast<std::ptrdiff_t>(from + count));
}

std::size_t share(std::size_t part, std::size_t of, std::size_t total) {
    return total == 0 ? 0 : static_cast<std::size_t>((static_cast<double>(part) * of) / total + 0.5);
}

}  // namespace

DatasetSplit split_dataset(std::span<const Episode> episodes, const SplitSizes& sizes, std::uint64_t seed,
                           bool stratify) {
    if (sizes.total() != episodes.size())
        throw ConfigError("split sizes sum to " + std::to_string(sizes.total()) + " but the manifest has " +
                          std::to_string(episodes.size()) + " episodes");
    DatasetSplit split;
    split.seed = seed;
    numerics::Rng rng(numerics::derive_seed(seed, "split"));
    if (!stratify) {
        std::vector<std::string> ids = ids_of(episodes, -1);
        rng.shuffle(std::span(ids));
        append(split.train, ids, 0, sizes.train);
        append(split.val, ids, sizes.train, sizes.val);
        append(split.test, ids, sizes.train + sizes.val, sizes.test);
        return split;
    }

    std::vector<std::string> pos = ids_of(episodes, 1);
    std::vector<std::string> neg = ids_of(episodes, 0);
    rng.shuffle(std::span(pos));
    rng.shuffle(std::span(neg));
    const std::size_t n = episodes.size();
    std::size_t pos_val = std::min(share(pos.size(), sizes.val, n), sizes.val);
    std::size_t pos_test = std::min(share(pos.size(), sizes.test, n), sizes.test);
    // Keep negative counts feasible when rounding overshoots.
    while (sizes.val - pos_val + sizes.test - pos_test > neg.size()) {
        if (pos_val < sizes.val) ++pos_val; else ++pos_test;
    }
    while (pos_val + pos_test > pos.size()) {
        if (pos_val > 0) --pos_val; else --pos_test;
    }
    const std::size_t pos_train = pos.size() - pos_val - pos_test;
    const std::size_t neg_val = sizes.val - pos_val;
    const std::size_t neg_test = sizes.test - pos_test;

    append(split.train, pos, 0, pos_train);
    append(split.val, pos, pos_train, pos_val);
    append(split.test, pos, pos_train + pos_val, pos_test);
    append(split.train, neg, 0, neg.size() - neg_val - neg_test);
    append(split.val, neg, neg.size() - neg_val - neg_test, neg_val);
    append(split.test, neg, neg.size() - neg_test, neg_test);
    rng.shuffle(std::span(split.train));
    rng.shuffle(std::span(split.val));
    rng.shuffle(std::span(split.test));
    return split;
}

std::vector<Episode> select(std::span<const Episode> episodes, std::span<const std::string> ids) {
    std::unordered_map<std::string_view, const Episode*> by_id;
    for (const Episode& e : episodes) by_id.emplace(e.episode_id, &e);
    std::vector<Episode> out;
    out.reserve(ids.size());
    for (const std::string& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw ConfigError("unknown episode id '" + id + "'");
        out.push_back(*it->second);
    }
    return out;
}

json DatasetStats::to_json() const {
    return {{"total", total},           {"positives", positives},   {"negatives", negatives},
            {"flagged", flagged},       {"vocab_size", vocab_size}, {"word_count", word_count},
            {"mean_length", mean_length}};
}

DatasetStats dataset_stats(std::span<const Episode> episodes) {
    DatasetStats s;
    std::set<std::string> vocab;
    for (const Episode& e : episodes) {
        ++s.total;
        (e.label == 1 ? s.positives : s.negatives) += 1;
        if (e.flagged_mislabel.value_or(false)) ++s.flagged;
        std::istringstream words(e.instruction);
        for (std::string w; words >> w;) {
            ++s.word_count;
            vocab.insert(std::move(w));
        }
    }
    s.vocab_size = vocab.size();
    s.mean_length = s.total == 0 ? 0.0 : static_cast<double>(s.word_count) / static_cast<double>(s.total);
    return s;
}

std::vector<VideoPair> video_pairs(const Episode& episode) {
    if (episode.frames.size() < 2)
        throw ConfigError("episode '" + episode.episode_id + "' needs at least 2 frames for video pairs");
    std::vector<VideoPair> pairs;
    for (std::size_t n = 1; n < episode.frames.size(); ++n)
        pairs.push_back({n, episode.frames.front(), episode.frames[n]});
    return pairs;
}

}  // namespace lrep::dataset
