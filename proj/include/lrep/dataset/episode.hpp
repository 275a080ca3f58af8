#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace lrep::dataset {

/// One labelled before/after pair. `label` is 1 for success, 0 for failure.
/// `frames`, when present, lists video phases in order, frame 0 first.
struct Episode {
    std::string episode_id;
    std::string instruction;
    int label = 0;
    std::string before_ref = "before";
    std::string after_ref = "after";
    std::optional<bool> flagged_mislabel;
    std::vector<std::string> frames;

    /// Throws ConfigError if the label or frame list is invalid.
    void validate() const;

    friend bool operator==(const Episode&, const Episode&) = default;
};

nlohmann::json to_json(const Episode& e);
/// Throws ConfigError naming the offending field.
Episode episode_from_json(const nlohmann::json& j);

/// JSON Lines, one episode per non-blank line. Parse and validation failures
/// throw ParseError with the 1-based line number; duplicate ids as well.
std::vector<Episode> load_manifest(const std::filesystem::path& path);
std::vector<Episode> parse_manifest(std::string_view text);
void write_manifest(const std::filesystem::path& path, std::span<const Episode> episodes);

/// Distinct instructions in first-seen order.
std::vector<std::string> instruction_pool(std::span<const Episode> episodes);

/// Flagged episodes get a different instruction drawn uniformly from `pool`.
/// Labels never change. Throws ConfigError for an empty pool, a flagged
/// positive, or a flagged episode whose instruction is the only pool entry.
std::vector<Episode> cleanse_negatives(std::vector<Episode> episodes, std::span<const std::string> pool,
                                       std::uint64_t seed);

struct SplitSizes {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;

    std::size_t total() const { return train + val + test; }
};

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
    std::uint64_t seed = 0;

    friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

nlohmann::json to_json(const DatasetSplit& s);
DatasetSplit split_from_json(const nlohmann::json& j);

/// Seeded shuffle, then train/val/test in order. With `stratify`, positives
/// and negatives are shuffled separately and shared out in proportion.
DatasetSplit split_dataset(std::span<const Episode> episodes, const SplitSizes& sizes, std::uint64_t seed,
                           bool stratify = false);

/// Episodes whose ids are listed, in list order. Throws ConfigError for an
/// unknown id.
std::vector<Episode> select(std::span<const Episode> episodes, std::span<const std::string> ids);

struct DatasetStats {
    std::size_t total = 0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::size_t flagged = 0;
    std::size_t vocab_size = 0;
    std::size_t word_count = 0;
    double mean_length = 0.0;

    nlohmann::json to_json() const;
};

/// Whitespace tokenization, case-sensitive.
DatasetStats dataset_stats(std::span<const Episode> episodes);

struct VideoPair {
    std::size_t n = 0;
    std::string before;
    std::string after;
};

/// (frame 0, frame n) for n = 1..N. Throws ConfigError with fewer than two
/// frames.
std::vector<VideoPair> video_pairs(const Episode& episode);

}  // namespace lrep::dataset
