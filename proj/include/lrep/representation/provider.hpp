#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "lrep/representation/feature_block.hpp"
#include "lrep/representation/source_registry.hpp"

namespace lrep::representation {

/// Source of feature blocks. `get` is deterministic for a given
/// (episode, phase, source) and throws MissingFeatureError when the block does
/// not exist. Implementations must tolerate concurrent calls, or be wrapped in
/// ExclusiveProvider.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual FeatureBlock get(std::string_view episode_id, std::string_view phase,
                             std::string_view source_id) const = 0;
    virtual std::optional<std::string> caption(std::string_view episode_id,
                                               std::string_view phase) const = 0;
};

/// Reads the on-disk layout described in lrep_io.hpp.
class FileProvider final : public EmbeddingProvider {
public:
    explicit FileProvider(std::filesystem::path root) : root_(std::move(root)) {}

    FeatureBlock get(std::string_view episode_id, std::string_view phase,
                     std::string_view source_id) const override;
    std::optional<std::string> caption(std::string_view episode_id,
                                       std::string_view phase) const override;

    const std::filesystem::path& root() const noexcept { return root_; }

private:
    std::filesystem::path root_;
};

/// In-memory feature store; the synthetic generator fills one of these.
class FeatureStore final : public EmbeddingProvider {
public:
    void put(std::string episode_id, std::string phase, FeatureBlock block);
    void put_caption(std::string episode_id, std::string phase, std::string text);

    FeatureBlock get(std::string_view episode_id, std::string_view phase,
                     std::string_view source_id) const override;
    std::optional<std::string> caption(std::string_view episode_id,
                                       std::string_view phase) const override;

    std::size_t block_count() const noexcept { return blocks_.size(); }

    /// Writes every block and caption under `root` in the file layout.
    void write_to(const std::filesystem::path& root) const;

    friend bool operator==(const FeatureStore& a, const FeatureStore& b) {
        return a.blocks_ == b.blocks_ && a.captions_ == b.captions_;
    }

private:
    // Keys join (episode, phase[, source]) with a unit separator.
    std::map<std::string, FeatureBlock, std::less<>> blocks_;
    std::map<std::string, std::string, std::less<>> captions_;
};

/// Hash-seeded pseudo-random blocks with dims taken from the registry. Any
/// episode id is valid; values are uniform in [-1, 1].
class RandomProvider final : public EmbeddingProvider {
public:
    RandomProvider(SourceRegistry registry, std::uint64_t seed)
        : registry_(std::move(registry)), seed_(seed) {}

    FeatureBlock get(std::string_view episode_id, std::string_view phase,
                     std::string_view source_id) const override;
    std::optional<std::string> caption(std::string_view episode_id,
                                       std::string_view phase) const override;

private:
    SourceRegistry registry_;
    std::uint64_t seed_;
};

/// Serializes access to a provider that is not safe for concurrent use.
class ExclusiveProvider final : public EmbeddingProvider {
public:
    explicit ExclusiveProvider(const EmbeddingProvider& inner) : inner_(inner) {}

    FeatureBlock get(std::string_view episode_id, std::string_view phase,
                     std::string_view source_id) const override;
    std::optional<std::string> caption(std::string_view episode_id,
                                       std::string_view phase) const override;

private:
    const EmbeddingProvider& inner_;
    mutable std::mutex mutex_;
};

}  // namespace lrep::representation
