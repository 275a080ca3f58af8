#include "lrep/representation/assembly.hpp"

#include <cmath>

#include "lrep/errors.hpp"
#include "lrep/numerics/random.hpp"

namespace lrep::representation {

void Projector::bind(const std::string& source_id, const Matrix& weight) {
    if (weight.cols() != d_model_) {
        throw ShapeError("projection for '" + source_id + "' is " + weight.shape_string() +
                         ", expected d_model " + std::to_string(d_model_) + " columns");
    }
    weights_[source_id] = &weight;
}

const Matrix& Projector::weight(std::string_view source_id) const {
    auto it = weights_.find(source_id);
    if (it == weights_.end()) {
        throw ConfigError("no projection bound for source '" + std::string(source_id) + "'");
    }
    return *it->second;
}

Matrix Projector::project(const FeatureBlock& block) const {
    const Matrix& w = weight(block.source_id);
    if (w.rows() != block.dim()) {
        throw ShapeError("block '" + block.source_id + "' has dim " + std::to_string(block.dim()) +
                         " but its projection is " + w.shape_string());
    }
    Matrix out(1, d_model_);
    for (std::size_t i = 0; i < block.dim(); ++i) {
        const double x = block.values[i];
        if (x == 0.0) continue;
        auto wr = w.row(i);
        for (std::size_t j = 0; j < d_model_; ++j) out(0, j) += x * wr[j];
    }
    return out;
}

Projector ProjectionTable::view() const {
    Projector p(d_model);
    for (const auto& [id, w] : weights) p.bind(id, w);
    return p;
}

ProjectionTable ProjectionTable::uniform_init(const SourceRegistry& registry, std::size_t d_model,
                                              std::uint64_t seed) {
    ProjectionTable t;
    t.d_model = d_model;
    for (const SourceSpec& s : registry.sources()) {
        numerics::Rng rng(numerics::derive_seed(seed, "proj." + s.id));
        const double bound = 1.0 / std::sqrt(static_cast<double>(s.dim));
        Matrix w(s.dim, d_model);
        for (double& x : w.data()) x = rng.uniform(-bound, bound);
        t.weights.emplace(s.id, std::move(w));
    }
    return t;
}

ProjectionTable ProjectionTable::identity(const SourceRegistry& registry, std::size_t d_model) {
    ProjectionTable t;
    t.d_model = d_model;
    for (const SourceSpec& s : registry.sources()) {
        Matrix w(s.dim, d_model);
        for (std::size_t i = 0; i < std::min(s.dim, d_model); ++i) w(i, i) = 1.0;
        t.weights.emplace(s.id, std::move(w));
    }
    return t;
}

std::vector<std::size_t> LambdaBlocks::indices(Group g) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < groups.size(); ++i)
        if (groups[i] == g) out.push_back(i);
    return out;
}

LambdaBlocks LambdaBlocks::without(Group g) const {
    LambdaBlocks out;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (groups[i] == g) continue;
        out.blocks.push_back(blocks[i]);
        out.groups.push_back(groups[i]);
    }
    return out;
}

LambdaRepresentation LambdaRepresentation::without(Group g) const {
    LambdaRepresentation out;
    out.raw = raw.without(g);
    std::vector<double> data;
    for (std::size_t i = 0; i < raw.groups.size(); ++i) {
        if (raw.groups[i] == g) continue;
        auto r = tokens.row(i);
        data.insert(data.end(), r.begin(), r.end());
    }
    out.tokens = Matrix(out.raw.token_count(), tokens.cols(), std::move(data));
    return out;
}

namespace {

std::vector<FeatureBlock> fetch_group(const EmbeddingProvider& provider,
                                      const SourceRegistry& registry, Group group,
                                      std::string_view episode_id, std::string_view phase) {
    std::vector<FeatureBlock> out;
    for (const SourceSpec& s : registry.sources_in(group)) {
        FeatureBlock b = provider.get(episode_id, phase, s.id);
        if (b.dim() != s.dim) {
            throw FormatError("episode '" + std::string(episode_id) + "' source '" + s.id +
                              "' has dim " + std::to_string(b.dim()) + ", registry declares " +
                              std::to_string(s.dim));
        }
        out.push_back(std::move(b));
    }
    return out;
}

}  // namespace

std::vector<FeatureBlock> assemble_scene(const EmbeddingProvider& provider,
                                         const SourceRegistry& registry,
                                         std::string_view episode_id, std::string_view phase) {
    return fetch_group(provider, registry, Group::scene, episode_id, phase);
}

std::vector<FeatureBlock> assemble_aligned(const EmbeddingProvider& provider,
                                           const SourceRegistry& registry,
                                           std::string_view episode_id, std::string_view phase) {
    return fetch_group(provider, registry, Group::aligned, episode_id, phase);
}

std::vector<FeatureBlock> assemble_narrative(const EmbeddingProvider& provider,
                                             const SourceRegistry& registry,
                                             std::string_view episode_id, std::string_view phase) {
    if (registry.sources_in(Group::narrative).empty()) return {};
    if (!provider.caption(episode_id, phase)) {
        throw MissingCaptionError(std::string(episode_id), std::string(phase));
    }
    return fetch_group(provider, registry, Group::narrative, episode_id, phase);
}

std::vector<FeatureBlock> assemble_instruction(const EmbeddingProvider& provider,
                                               const SourceRegistry& registry,
                                               std::string_view episode_id) {
    return fetch_group(provider, registry, Group::instruction, episode_id, phase::instruction);
}

LambdaBlocks stack_blocks(std::vector<FeatureBlock> scene, std::vector<FeatureBlock> aligned,
                          std::vector<FeatureBlock> narrative) {
    LambdaBlocks out;
    const auto append = [&](std::vector<FeatureBlock>& part, Group g) {
        for (FeatureBlock& b : part) {
            out.blocks.push_back(std::move(b));
            out.groups.push_back(g);
        }
    };
    append(scene, Group::scene);
    append(aligned, Group::aligned);
    append(narrative, Group::narrative);
    if (out.blocks.empty()) {
        throw EmptyRepresentationError("scene, aligned and narrative groups are all empty");
    }
    return out;
}

LambdaRepresentation project_lambda(LambdaBlocks blocks, const Projector& projector) {
    LambdaRepresentation rep;
    std::vector<double> data;
    data.reserve(blocks.token_count() * projector.d_model());
    for (const FeatureBlock& b : blocks.blocks) {
        const Matrix t = projector.project(b);
        data.insert(data.end(), t.data().begin(), t.data().end());
    }
    rep.tokens = Matrix(blocks.token_count(), projector.d_model(), std::move(data));
    rep.raw = std::move(blocks);
    return rep;
}

LambdaRepresentation assemble_lambda(std::vector<FeatureBlock> scene,
                                     std::vector<FeatureBlock> aligned,
                                     std::vector<FeatureBlock> narrative,
                                     const Projector& projector) {
    return project_lambda(stack_blocks(std::move(scene), std::move(aligned), std::move(narrative)),
                          projector);
}

LanguageFeature assemble_language(const EmbeddingProvider& provider, const SourceRegistry& registry,
                                  std::string_view episode_id, const Projector& projector) {
    LanguageFeature lf;
    lf.raw = assemble_instruction(provider, registry, episode_id);
    if (lf.raw.empty()) throw EmptyRepresentationError("no instruction sources registered");
    std::vector<double> data;
    for (const FeatureBlock& b : lf.raw) {
        const Matrix t = projector.project(b);
        data.insert(data.end(), t.data().begin(), t.data().end());
    }
    lf.tokens = Matrix(lf.raw.size(), projector.d_model(), std::move(data));
    return lf;
}

LambdaBlocks gather_lambda(const EmbeddingProvider& provider, const SourceRegistry& registry,
                           std::string_view episode_id, std::string_view phase) {
    return stack_blocks(assemble_scene(provider, registry, episode_id, phase),
                        assemble_aligned(provider, registry, episode_id, phase),
                        assemble_narrative(provider, registry, episode_id, phase));
}

EpisodeFeatures gather_episode(const EmbeddingProvider& provider, const SourceRegistry& registry,
                               std::string_view episode_id, std::string_view before_phase,
                               std::string_view after_phase) {
    EpisodeFeatures f;
    f.before = gather_lambda(provider, registry, episode_id, before_phase);
    f.after = gather_lambda(provider, registry, episode_id, after_phase);
    f.language = assemble_instruction(provider, registry, episode_id);
    if (f.language.empty()) throw EmptyRepresentationError("no instruction sources registered");
    return f;
}

}  // namespace lrep::representation
