#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lrep/numerics/matrix.hpp"
#include "lrep/representation/feature_block.hpp"
#include "lrep/representation/provider.hpp"
#include "lrep/representation/source_registry.hpp"

namespace lrep::representation {

using numerics::Matrix;

/// Non-owning view over per-source projection weights (dim_in x d_model).
class Projector {
public:
    explicit Projector(std::size_t d_model) : d_model_(d_model) {}

    void bind(const std::string& source_id, const Matrix& weight);
    std::size_t d_model() const noexcept { return d_model_; }
    const Matrix& weight(std::string_view source_id) const;
    bool has(std::string_view source_id) const { return weights_.find(source_id) != weights_.end(); }

    /// 1 x d_model token for one block.
    Matrix project(const FeatureBlock& block) const;

private:
    std::size_t d_model_;
    std::map<std::string, const Matrix*, std::less<>> weights_;
};

/// Owning projection weights, for use outside a full decoder.
struct ProjectionTable {
    std::size_t d_model = 0;
    std::map<std::string, Matrix, std::less<>> weights;

    Projector view() const;

    /// Uniform in [-1/sqrt(dim_in), 1/sqrt(dim_in)].
    static ProjectionTable uniform_init(const SourceRegistry& registry, std::size_t d_model,
                                        std::uint64_t seed);
    /// Identity where dim_in == d_model, otherwise a truncated identity.
    static ProjectionTable identity(const SourceRegistry& registry, std::size_t d_model);
};

/// Raw blocks of one image in token order plus the group of each token.
struct LambdaBlocks {
    std::vector<FeatureBlock> blocks;
    std::vector<Group> groups;

    std::size_t token_count() const noexcept { return blocks.size(); }
    std::vector<std::size_t> indices(Group g) const;
    LambdaBlocks without(Group g) const;

    friend bool operator==(const LambdaBlocks&, const LambdaBlocks&) = default;
};

/// Scene, aligned and narrative tokens of one image, projected to d_model.
struct LambdaRepresentation {
    LambdaBlocks raw;
    Matrix tokens;

    std::size_t token_count() const noexcept { return tokens.rows(); }
    std::vector<std::size_t> indices(Group g) const { return raw.indices(g); }
    /// Removes the tokens of group `g`, keeping the order of the rest.
    LambdaRepresentation without(Group g) const;

    friend bool operator==(const LambdaRepresentation&, const LambdaRepresentation&) = default;
};

struct LanguageFeature {
    std::vector<FeatureBlock> raw;
    Matrix tokens;

    friend bool operator==(const LanguageFeature&, const LanguageFeature&) = default;
};

/// Everything the decoder consumes for one before/after pair.
struct EpisodeFeatures {
    LambdaBlocks before;
    LambdaBlocks after;
    std::vector<FeatureBlock> language;
};

std::vector<FeatureBlock> assemble_scene(const EmbeddingProvider& provider,
                                         const SourceRegistry& registry,
                                         std::string_view episode_id, std::string_view phase);
std::vector<FeatureBlock> assemble_aligned(const EmbeddingProvider& provider,
                                           const SourceRegistry& registry,
                                           std::string_view episode_id, std::string_view phase);
/// Throws MissingCaptionError when the provider has no caption for the image.
std::vector<FeatureBlock> assemble_narrative(const EmbeddingProvider& provider,
                                             const SourceRegistry& registry,
                                             std::string_view episode_id, std::string_view phase);
std::vector<FeatureBlock> assemble_instruction(const EmbeddingProvider& provider,
                                               const SourceRegistry& registry,
                                               std::string_view episode_id);

/// Orders groups scene, aligned, narrative. Throws EmptyRepresentationError
/// when all three are empty.
LambdaBlocks stack_blocks(std::vector<FeatureBlock> scene, std::vector<FeatureBlock> aligned,
                          std::vector<FeatureBlock> narrative);

LambdaRepresentation assemble_lambda(std::vector<FeatureBlock> scene,
                                     std::vector<FeatureBlock> aligned,
                                     std::vector<FeatureBlock> narrative,
                                     const Projector& projector);
LambdaRepresentation project_lambda(LambdaBlocks blocks, const Projector& projector);

LanguageFeature assemble_language(const EmbeddingProvider& provider, const SourceRegistry& registry,
                                  std::string_view episode_id, const Projector& projector);

/// Scene, aligned and narrative blocks of one image.
LambdaBlocks gather_lambda(const EmbeddingProvider& provider, const SourceRegistry& registry,
                           std::string_view episode_id, std::string_view phase);

EpisodeFeatures gather_episode(const EmbeddingProvider& provider, const SourceRegistry& registry,
                               std::string_view episode_id,
                               std::string_view before_phase = phase::before,
                               std::string_view after_phase = phase::after);

}  // namespace lrep::representation
